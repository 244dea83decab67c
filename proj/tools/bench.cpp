// Rough conv throughput probe used while sizing experiment budgets.
#include <chrono>
#include <cstdio>

#include "leanet/prng.hpp"
#include "leanet/tensor.hpp"

using namespace leanet;

namespace {

double bench_case(int N, int H, int W, int Ci, int k, int Co, int stride, int pad, int reps,
                  bool with_backward, bool input_grad = true) {
  Rng rng(1);
  std::vector<float> xd(size_t(N) * H * W * Ci), kd(size_t(k) * k * Ci * Co);
  for (float& v : xd) v = rng.uniform(-1.0f, 1.0f);
  for (float& v : kd) v = rng.uniform(-0.1f, 0.1f);
  Tensor x = Tensor::from_data({N, H, W, Ci}, xd);
  Tensor ker = Tensor::from_data({k, k, Ci, Co}, kd);
  if (with_backward) {
    x.set_requires_grad(input_grad);
    ker.set_requires_grad(true);
  }
  const int Ho = (H + 2 * pad - k) / stride + 1, Wo = (W + 2 * pad - k) / stride + 1;
  const double macs = double(N) * Ho * Wo * k * k * Ci * Co;
  const double flops_per_rep = 2.0 * macs * (with_backward ? (input_grad ? 3.0 : 2.0) : 1.0);

  const auto t0 = std::chrono::steady_clock::now();
  float sink = 0.0f;
  for (int r = 0; r < reps; ++r) {
    Tensor y = conv2d(x, ker, stride, pad);
    if (with_backward) backward(sum(y));
    sink += y.data()[0];
  }
  const auto t1 = std::chrono::steady_clock::now();
  const double sec = std::chrono::duration<double>(t1 - t0).count();
  std::printf("conv %dx%dx%dx%d k%d s%d p%d Co%d %s: %7.2f GFLOP/s (%.3f s, sink %.3f)\n", N, H, W,
              Ci, k, stride, pad, Co, with_backward ? "fwd+bwd" : "fwd    ",
              flops_per_rep * reps / sec / 1e9, sec, double(sink));
  return flops_per_rep * reps / sec / 1e9;
}

}  // namespace

int main() {
  bench_case(8, 64, 64, 8, 3, 16, 1, 1, 40, false);
  bench_case(8, 64, 64, 8, 3, 16, 1, 1, 15, true);
  bench_case(8, 32, 32, 32, 3, 64, 1, 1, 15, true);
  bench_case(8, 16, 16, 64, 3, 64, 2, 1, 40, true);
  bench_case(8, 64, 64, 1, 7, 8, 1, 3, 40, true);
  bench_case(8, 64, 64, 1, 7, 8, 1, 3, 40, true, /*input_grad=*/false);
  bench_case(8, 64, 64, 3, 3, 4, 1, 1, 40, true, /*input_grad=*/false);
  bench_case(8, 8, 8, 64, 3, 64, 1, 1, 60, true);
  return 0;
}
