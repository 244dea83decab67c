#include "leanet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace leanet {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

int shape_size(const Shape& s) {
  int n = 1;
  for (int e : s) n *= e;
  return n;
}

namespace {

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::runtime_error(msg);
}

std::shared_ptr<detail::Node> new_node(Shape shape) {
  check(!shape.empty() && shape.size() <= 4,
        "tensor rank must be 1..4, got " + shape_str(shape));
  for (int e : shape) check(e > 0, "non-positive extent in shape " + shape_str(shape));
  auto n = std::make_shared<detail::Node>();
  n->value.assign(size_t(shape_size(shape)), 0.0f);
  n->shape = std::move(shape);
  return n;
}

// Spatial dims shared by the conv-family ops; rank-3 inputs are batch of one.
struct ConvDims {
  int N, H, W, Ci, k, Co, Ho, Wo;
  bool batched;
};

ConvDims conv_dims(const Tensor& in, const Tensor& ker, int stride, int pad,
                   const char* op, bool depthwise) {
  const Shape& is = in.shape();
  const Shape& ks = ker.shape();
  check(is.size() == 3 || is.size() == 4,
        std::string(op) + ": input must be rank 3 or 4, got " + shape_str(is));
  check(ks.size() == 4, std::string(op) + ": kernel must be rank 4, got " + shape_str(ks));
  ConvDims d;
  d.batched = is.size() == 4;
  d.N = d.batched ? is[0] : 1;
  d.H = is[d.batched ? 1 : 0];
  d.W = is[d.batched ? 2 : 1];
  d.Ci = is[d.batched ? 3 : 2];
  d.k = ks[0];
  d.Co = depthwise ? d.Ci : ks[3];
  check(ks[1] == d.k, std::string(op) + ": kernel must be square, got " + shape_str(ks));
  check(stride >= 1, std::string(op) + ": stride must be >= 1");
  check(pad >= 0, std::string(op) + ": pad must be >= 0");
  check(ks[2] == d.Ci, std::string(op) + ": channel mismatch between input " + shape_str(is) +
                           " and kernel " + shape_str(ks));
  if (depthwise)
    check(ks[3] == 1, std::string(op) + ": kernel last extent must be 1, got " + shape_str(ks));
  check(d.k <= d.H + 2 * pad && d.k <= d.W + 2 * pad,
        std::string(op) + ": kernel " + shape_str(ks) + " larger than padded input " + shape_str(is));
  d.Ho = (d.H + 2 * pad - d.k) / stride + 1;
  d.Wo = (d.W + 2 * pad - d.k) / stride + 1;
  return d;
}

// Register-tiled conv workers. CW is the compile-time channel-tile width (0
// selects the runtime-width fallback); fixed-width tiles let the compiler
// keep the accumulator in vector registers across the reduction loops.
template <int CW>
void conv_fwd_tile(const float* __restrict xn, const float* __restrict K, float* __restrict yn,
                   int H, int W, int Ci, int Co, int k, int Ho, int Wo, int stride, int pad,
                   int co0, int cw_dyn) {
  const int cw = CW ? CW : cw_dyn;
  for (int oy = 0; oy < Ho; ++oy) {
    const int iy0 = oy * stride - pad;
    const int ky_lo = std::max(0, -iy0), ky_hi = std::min(k, H - iy0);
    for (int ox = 0; ox < Wo; ++ox) {
      const int ix0 = ox * stride - pad;
      const int kx_lo = std::max(0, -ix0), kx_hi = std::min(k, W - ix0);
      float acc[CW ? CW : 64];
      for (int j = 0; j < cw; ++j) acc[j] = 0.0f;
      for (int ky = ky_lo; ky < ky_hi; ++ky) {
        const float* __restrict xrow = xn + size_t(iy0 + ky) * W * Ci;
        const float* __restrict krow = K + size_t(ky) * k * Ci * Co + co0;
        for (int kx = kx_lo; kx < kx_hi; ++kx) {
          const float* __restrict xv = xrow + size_t(ix0 + kx) * Ci;
          const float* __restrict kv = krow + size_t(kx) * size_t(Ci) * Co;
          for (int ci = 0; ci < Ci; ++ci) {
            const float v = xv[ci];
            const float* __restrict kc = kv + size_t(ci) * Co;
            for (int j = 0; j < cw; ++j) acc[j] += v * kc[j];
          }
        }
      }
      float* __restrict y = yn + (size_t(oy) * Wo + ox) * Co + co0;
      for (int j = 0; j < cw; ++j) y[j] = acc[j];
    }
  }
}

// Gradient w.r.t. the kernel: per (ky,kx,ci) row, reduce over output cells.
template <int CW>
void conv_dk_tile(const float* __restrict xn, const float* __restrict gyn, float* __restrict DK,
                  int H, int W, int Ci, int Co, int k, int Ho, int Wo, int stride, int pad,
                  int co0, int cw_dyn) {
  const int cw = CW ? CW : cw_dyn;
  for (int ky = 0; ky < k; ++ky) {
    // output rows whose receptive field keeps iy = oy*stride - pad + ky in range
    int oy_lo = 0;
    while (oy_lo < Ho && oy_lo * stride - pad + ky < 0) ++oy_lo;
    int oy_hi = Ho - 1;
    while (oy_hi >= 0 && oy_hi * stride - pad + ky >= H) --oy_hi;
    for (int kx = 0; kx < k; ++kx) {
      int ox_lo = 0;
      while (ox_lo < Wo && ox_lo * stride - pad + kx < 0) ++ox_lo;
      int ox_hi = Wo - 1;
      while (ox_hi >= 0 && ox_hi * stride - pad + kx >= W) --ox_hi;
      if (oy_lo > oy_hi || ox_lo > ox_hi) continue;
      for (int ci = 0; ci < Ci; ++ci) {
        float acc[CW ? CW : 64];
        for (int j = 0; j < cw; ++j) acc[j] = 0.0f;
        for (int oy = oy_lo; oy <= oy_hi; ++oy) {
          const int iy = oy * stride - pad + ky;
          const float* __restrict xrow = xn + size_t(iy) * W * Ci;
          const float* __restrict gyrow = gyn + size_t(oy) * Wo * Co + co0;
          for (int ox = ox_lo; ox <= ox_hi; ++ox) {
            const float v = xrow[size_t(ox * stride - pad + kx) * Ci + ci];
            const float* __restrict gy = gyrow + size_t(ox) * Co;
            for (int j = 0; j < cw; ++j) acc[j] += v * gy[j];
          }
        }
        float* __restrict dk = DK + (size_t(ky) * k + kx) * Ci * Co + size_t(ci) * Co + co0;
        for (int j = 0; j < cw; ++j) dk[j] += acc[j];
      }
    }
  }
}

// Gradient w.r.t. the input, via the co-major transposed kernel KT so the
// inner loop runs over contiguous ci lanes.
template <int CW>
void conv_dx_tile(const float* __restrict gyn, const float* __restrict KT, float* __restrict dxn,
                  int H, int W, int Ci, int Co, int k, int Ho, int Wo, int stride, int pad,
                  int ci0, int cw_dyn) {
  const int cw = CW ? CW : cw_dyn;
  for (int iy = 0; iy < H; ++iy) {
    for (int ix = 0; ix < W; ++ix) {
      float acc[CW ? CW : 64];
      for (int j = 0; j < cw; ++j) acc[j] = 0.0f;
      for (int ky = 0; ky < k; ++ky) {
        const int t = iy + pad - ky;
        if (t < 0 || t % stride != 0) continue;
        const int oy = t / stride;
        if (oy >= Ho) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int u = ix + pad - kx;
          if (u < 0 || u % stride != 0) continue;
          const int ox = u / stride;
          if (ox >= Wo) continue;
          const float* __restrict gy = gyn + (size_t(oy) * Wo + ox) * Co;
          const float* __restrict ktrow = KT + (size_t(ky) * k + kx) * Ci * Co + ci0;
          for (int co = 0; co < Co; ++co) {
            const float g = gy[co];
            const float* __restrict kt = ktrow + size_t(co) * Ci;
            for (int j = 0; j < cw; ++j) acc[j] += g * kt[j];
          }
        }
      }
      float* __restrict dx = dxn + (size_t(iy) * W + ix) * Ci + ci0;
      for (int j = 0; j < cw; ++j) dx[j] += acc[j];
    }
  }
}

// Tiles a channel axis of extent C into fixed-width register kernels.
template <typename F>
void for_each_tile(int C, F&& call) {
  for (int c0 = 0; c0 < C; c0 += 64) {
    const int cw = std::min(64, C - c0);
    switch (cw) {
      case 64: call.template operator()<64>(c0, 64); break;
      case 32: call.template operator()<32>(c0, 32); break;
      case 16: call.template operator()<16>(c0, 16); break;
      case 8: call.template operator()<8>(c0, 8); break;
      case 4: call.template operator()<4>(c0, 4); break;
      default: call.template operator()<0>(c0, cw); break;
    }
  }
}

}  // namespace

// ==== Tensor methods ========================================================

Tensor Tensor::zeros(Shape shape) { return Tensor(new_node(std::move(shape))); }

Tensor Tensor::full(Shape shape, float v) {
  Tensor t(new_node(std::move(shape)));
  std::fill(t.node_->value.begin(), t.node_->value.end(), v);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data) {
  Tensor t(new_node(std::move(shape)));
  check(data.size() == t.node_->value.size(),
        "from_data: " + std::to_string(data.size()) + " values for shape " +
            shape_str(t.node_->shape));
  t.node_->value = std::move(data);
  return t;
}

Tensor Tensor::he_uniform(Shape shape, int fan_in, Rng& rng) {
  check(fan_in > 0, "he_uniform: fan_in must be positive");
  Tensor t(new_node(std::move(shape)));
  const float limit = std::sqrt(6.0f / float(fan_in));
  for (float& v : t.node_->value) v = rng.uniform(-limit, limit);
  t.node_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const {
  check(defined(), "shape() on undefined tensor");
  return node_->shape;
}
int Tensor::rank() const { return int(shape().size()); }
int Tensor::extent(int axis) const {
  const Shape& s = shape();
  check(axis >= 0 && axis < int(s.size()), "extent: axis out of range");
  return s[size_t(axis)];
}
int Tensor::size() const { return shape_size(shape()); }

std::vector<float>& Tensor::data() {
  check(defined(), "data() on undefined tensor");
  return node_->value;
}
const std::vector<float>& Tensor::data() const {
  check(defined(), "data() on undefined tensor");
  return node_->value;
}

float Tensor::scalar() const {
  check(size() == 1, "scalar() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return defined() && node_->requires_grad; }
Tensor& Tensor::set_requires_grad(bool on) {
  check(defined(), "set_requires_grad on undefined tensor");
  node_->requires_grad = on;
  return *this;
}
bool Tensor::has_grad() const { return defined() && !node_->grad.empty(); }
const std::vector<float>& Tensor::grad() const {
  check(has_grad(), "grad() requested but backward never reached this tensor");
  return node_->grad;
}
void Tensor::zero_grad() {
  check(defined(), "zero_grad on undefined tensor");
  node_->grad.assign(node_->value.size(), 0.0f);
}

Tensor Tensor::detach() const {
  check(defined(), "detach on undefined tensor");
  Tensor t(new_node(node_->shape));
  t.node_->value = node_->value;
  return t;
}

Tensor make_op(Shape shape, std::vector<Tensor> parents,
               std::function<void(detail::Node&)> backprop) {
  Tensor t(new_node(std::move(shape)));
  bool rg = false;
  t.node_->parents.reserve(parents.size());
  for (const Tensor& p : parents) {
    check(p.defined(), "op input tensor is undefined");
    t.node_->parents.push_back(p.node());
    rg = rg || p.node()->requires_grad;
  }
  t.node_->requires_grad = rg;
  if (rg) t.node_->backprop = std::move(backprop);
  return t;
}

// ==== backward ==============================================================

void backward(const Tensor& loss) {
  check(loss.defined(), "backward on undefined tensor");
  detail::Node* root = loss.node().get();
  check(shape_size(root->shape) == 1,
        "backward requires a scalar loss, got " + shape_str(root->shape));

  // Iterative post-order DFS over grad-requiring ancestry: emits every node
  // exactly once, parents before dependents.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& top = stack.back();
    detail::Node* n = top.first;
    if (top.second < n->parents.size()) {
      detail::Node* p = n->parents[top.second++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Fresh grads each call: no accumulation across backward() invocations.
  for (detail::Node* n : order) n->grad.assign(n->value.size(), 0.0f);
  root->grad.assign(1, 1.0f);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

// ==== conv2d ================================================================

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad) {
  const ConvDims d = conv_dims(input, kernel, stride, pad, "conv2d", false);
  Shape oshape = d.batched ? Shape{d.N, d.Ho, d.Wo, d.Co} : Shape{d.Ho, d.Wo, d.Co};
  detail::Node* in = input.node().get();
  detail::Node* kn = kernel.node().get();

  Tensor out = make_op(std::move(oshape), {input, kernel}, [d, stride, pad, in, kn](detail::Node& self) {
    const int H = d.H, W = d.W, Ci = d.Ci, Co = d.Co, k = d.k, Ho = d.Ho, Wo = d.Wo;
    const float* X = in->value.data();
    const float* K = kn->value.data();
    const float* GY = self.grad.data();
    const bool need_dx = in->requires_grad;
    const bool need_dk = kn->requires_grad;
    std::vector<float> kt;
    if (need_dx) {  // co-major kernel transpose so dX lanes run over contiguous ci
      kt.resize(size_t(k) * k * Ci * Co);
      for (int t = 0; t < k * k; ++t) {
        const size_t base = size_t(t) * Ci * Co;
        for (int ci = 0; ci < Ci; ++ci)
          for (int co = 0; co < Co; ++co) kt[base + size_t(co) * Ci + ci] = K[base + size_t(ci) * Co + co];
      }
    }
    for (int n = 0; n < d.N; ++n) {
      const float* xn = X + size_t(n) * H * W * Ci;
      const float* gyn = GY + size_t(n) * Ho * Wo * Co;
      if (need_dk) {
        float* DK = kn->grad.data();
        for_each_tile(Co, [&]<int CW>(int co0, int cw) {
          conv_dk_tile<CW>(xn, gyn, DK, H, W, Ci, Co, k, Ho, Wo, stride, pad, co0, cw);
        });
      }
      if (need_dx) {
        float* dxn = in->grad.data() + size_t(n) * H * W * Ci;
        for_each_tile(Ci, [&]<int CW>(int ci0, int cw) {
          conv_dx_tile<CW>(gyn, kt.data(), dxn, H, W, Ci, Co, k, Ho, Wo, stride, pad, ci0, cw);
        });
      }
    }
  });

  const int H = d.H, W = d.W, Ci = d.Ci, Co = d.Co, k = d.k, Ho = d.Ho, Wo = d.Wo;
  const float* X = input.data().data();
  const float* K = kernel.data().data();
  float* Y = out.data().data();
  for (int n = 0; n < d.N; ++n) {
    const float* xn = X + size_t(n) * H * W * Ci;
    float* yn = Y + size_t(n) * Ho * Wo * Co;
    for_each_tile(Co, [&]<int CW>(int co0, int cw) {
      conv_fwd_tile<CW>(xn, K, yn, H, W, Ci, Co, k, Ho, Wo, stride, pad, co0, cw);
    });
  }
  return out;
}

// ==== depthwise_conv2d ======================================================

Tensor depthwise_conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad) {
  const ConvDims d = conv_dims(input, kernel, stride, pad, "depthwise_conv2d", true);
  Shape oshape = d.batched ? Shape{d.N, d.Ho, d.Wo, d.Ci} : Shape{d.Ho, d.Wo, d.Ci};
  detail::Node* in = input.node().get();
  detail::Node* kn = kernel.node().get();

  Tensor out = make_op(std::move(oshape), {input, kernel}, [d, stride, pad, in, kn](detail::Node& self) {
    const int H = d.H, W = d.W, C = d.Ci, k = d.k, Ho = d.Ho, Wo = d.Wo;
    const float* X = in->value.data();
    const float* K = kn->value.data();
    const float* GY = self.grad.data();
    const bool need_dx = in->requires_grad;
    const bool need_dk = kn->requires_grad;
    for (int n = 0; n < d.N; ++n) {
      const float* xn = X + size_t(n) * H * W * C;
      float* dxn = need_dx ? in->grad.data() + size_t(n) * H * W * C : nullptr;
      const float* gyn = GY + size_t(n) * Ho * Wo * C;
      for (int oy = 0; oy < Ho; ++oy) {
        const int iy0 = oy * stride - pad;
        const int ky_lo = std::max(0, -iy0), ky_hi = std::min(k, H - iy0);
        for (int ox = 0; ox < Wo; ++ox) {
          const int ix0 = ox * stride - pad;
          const int kx_lo = std::max(0, -ix0), kx_hi = std::min(k, W - ix0);
          const float* gy = gyn + (size_t(oy) * Wo + ox) * C;
          for (int ky = ky_lo; ky < ky_hi; ++ky) {
            for (int kx = kx_lo; kx < kx_hi; ++kx) {
              const size_t at = (size_t(iy0 + ky) * W + size_t(ix0 + kx)) * C;
              const size_t kat = (size_t(ky) * k + kx) * C;
              if (need_dk) {
                const float* xv = xn + at;
                float* dk = kn->grad.data() + kat;
                for (int c = 0; c < C; ++c) dk[c] += xv[c] * gy[c];
              }
              if (need_dx) {
                const float* kv = K + kat;
                float* dx = dxn + at;
                for (int c = 0; c < C; ++c) dx[c] += kv[c] * gy[c];
              }
            }
          }
        }
      }
    }
  });

  const int H = d.H, W = d.W, C = d.Ci, k = d.k, Ho = d.Ho, Wo = d.Wo;
  const float* X = input.data().data();
  const float* K = kernel.data().data();
  float* Y = out.data().data();
  for (int n = 0; n < d.N; ++n) {
    const float* xn = X + size_t(n) * H * W * C;
    float* yn = Y + size_t(n) * Ho * Wo * C;
    for (int oy = 0; oy < Ho; ++oy) {
      const int iy0 = oy * stride - pad;
      const int ky_lo = std::max(0, -iy0), ky_hi = std::min(k, H - iy0);
      for (int ox = 0; ox < Wo; ++ox) {
        const int ix0 = ox * stride - pad;
        const int kx_lo = std::max(0, -ix0), kx_hi = std::min(k, W - ix0);
        float* acc = yn + (size_t(oy) * Wo + ox) * C;
        for (int ky = ky_lo; ky < ky_hi; ++ky) {
          for (int kx = kx_lo; kx < kx_hi; ++kx) {
            const float* xv = xn + (size_t(iy0 + ky) * W + size_t(ix0 + kx)) * C;
            const float* kv = K + (size_t(ky) * k + kx) * C;
            for (int c = 0; c < C; ++c) acc[c] += xv[c] * kv[c];
          }
        }
      }
    }
  }
  return out;
}

// ==== conv2d_transpose ======================================================

Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, int stride) {
  const Shape& is = input.shape();
  const Shape& ks = kernel.shape();
  check(is.size() == 3 || is.size() == 4,
        "conv2d_transpose: input must be rank 3 or 4, got " + shape_str(is));
  check(ks.size() == 4, "conv2d_transpose: kernel must be rank 4, got " + shape_str(ks));
  check(stride >= 1, "conv2d_transpose: stride must be >= 1");
  const int k = ks[0];
  check(ks[1] == k, "conv2d_transpose: kernel must be square, got " + shape_str(ks));
  check(k == stride, "conv2d_transpose: only kernel == stride supported, got kernel " +
                         std::to_string(k) + " stride " + std::to_string(stride));
  const bool batched = is.size() == 4;
  const int N = batched ? is[0] : 1;
  const int H = is[batched ? 1 : 0], W = is[batched ? 2 : 1], Ci = is[batched ? 3 : 2];
  const int Co = ks[3];
  check(ks[2] == Ci, "conv2d_transpose: channel mismatch between input " + shape_str(is) +
                         " and kernel " + shape_str(ks));
  const int Ho = H * stride, Wo = W * stride;

  detail::Node* in = input.node().get();
  detail::Node* kn = kernel.node().get();
  Shape oshape = batched ? Shape{N, Ho, Wo, Co} : Shape{Ho, Wo, Co};

  Tensor out = make_op(std::move(oshape), {input, kernel},
                       [N, H, W, Ci, Co, k, Ho, Wo, stride, in, kn](detail::Node& self) {
    const float* X = in->value.data();
    const float* K = kn->value.data();
    const float* GY = self.grad.data();
    const bool need_dx = in->requires_grad;
    const bool need_dk = kn->requires_grad;
    for (int n = 0; n < N; ++n) {
      const float* xn = X + size_t(n) * H * W * Ci;
      float* dxn = need_dx ? in->grad.data() + size_t(n) * H * W * Ci : nullptr;
      const float* gyn = GY + size_t(n) * Ho * Wo * Co;
      for (int iy = 0; iy < H; ++iy) {
        for (int ix = 0; ix < W; ++ix) {
          const float* xv = xn + (size_t(iy) * W + ix) * Ci;
          float* dxv = need_dx ? dxn + (size_t(iy) * W + ix) * Ci : nullptr;
          for (int ky = 0; ky < k; ++ky) {
            const float* gyrow = gyn + (size_t(iy * stride + ky) * Wo + size_t(ix * stride)) * Co;
            for (int kx = 0; kx < k; ++kx) {
              const float* gy = gyrow + size_t(kx) * Co;
              const size_t kat = (size_t(ky) * k + kx) * Ci * Co;
              if (need_dk) {
                float* dk = kn->grad.data() + kat;
                for (int ci = 0; ci < Ci; ++ci) {
                  const float v = xv[ci];
                  float* dkc = dk + size_t(ci) * Co;
                  for (int co = 0; co < Co; ++co) dkc[co] += v * gy[co];
                }
              }
              if (need_dx) {
                const float* kv = K + kat;
                for (int ci = 0; ci < Ci; ++ci) {
                  const float* kc = kv + size_t(ci) * Co;
                  float s = 0.0f;
                  for (int co = 0; co < Co; ++co) s += kc[co] * gy[co];
                  dxv[ci] += s;
                }
              }
            }
          }
        }
      }
    }
  });

  const float* X = input.data().data();
  const float* K = kernel.data().data();
  float* Y = out.data().data();
  for (int n = 0; n < N; ++n) {
    const float* xn = X + size_t(n) * H * W * Ci;
    float* yn = Y + size_t(n) * Ho * Wo * Co;
    for (int iy = 0; iy < H; ++iy) {
      for (int ix = 0; ix < W; ++ix) {
        const float* xv = xn + (size_t(iy) * W + ix) * Ci;
        for (int ky = 0; ky < k; ++ky) {
          float* yrow = yn + (size_t(iy * stride + ky) * Wo + size_t(ix * stride)) * Co;
          for (int kx = 0; kx < k; ++kx) {
            float* acc = yrow + size_t(kx) * Co;
            const float* kv = K + (size_t(ky) * k + kx) * Ci * Co;
            for (int ci = 0; ci < Ci; ++ci) {
              const float v = xv[ci];
              const float* kc = kv + size_t(ci) * Co;
              for (int co = 0; co < Co; ++co) acc[co] += v * kc[co];
            }
          }
        }
      }
    }
  }
  return out;
}

// ==== add_channel_bias ======================================================

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  const Shape& is = x.shape();
  const int C = is.back();
  check(bias.rank() == 1 && bias.extent(0) == C,
        "add_channel_bias: bias " + shape_str(bias.shape()) + " vs input " + shape_str(is));
  detail::Node* in = x.node().get();
  detail::Node* bn = bias.node().get();
  const int outer = shape_size(is) / C;

  Tensor out = make_op(is, {x, bias}, [outer, C, in, bn](detail::Node& self) {
    const float* GY = self.grad.data();
    if (in->requires_grad) {
      float* dx = in->grad.data();
      const size_t total = size_t(outer) * C;
      for (size_t i = 0; i < total; ++i) dx[i] += GY[i];
    }
    if (bn->requires_grad) {
      float* db = bn->grad.data();
      for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (int j = 0; j < outer; ++j) s += GY[size_t(j) * C + c];
        db[c] += float(s);
      }
    }
  });

  const float* X = x.data().data();
  const float* B = bias.data().data();
  float* Y = out.data().data();
  for (int j = 0; j < outer; ++j)
    for (int c = 0; c < C; ++c) Y[size_t(j) * C + c] = X[size_t(j) * C + c] + B[c];
  return out;
}

// ==== batchnorm =============================================================

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 BnMode mode, BatchNormStats& stats, float momentum, float eps) {
  const Shape& is = x.shape();
  check(is.size() >= 2, "batchnorm: input must have a channel axis, got " + shape_str(is));
  const int C = is.back();
  check(gamma.rank() == 1 && gamma.extent(0) == C && beta.rank() == 1 && beta.extent(0) == C,
        "batchnorm: gamma " + shape_str(gamma.shape()) + " / beta " + shape_str(beta.shape()) +
            " vs input " + shape_str(is));
  const int m = shape_size(is) / C;  // batch * spatial count per channel
  detail::Node* in = x.node().get();
  detail::Node* gn = gamma.node().get();
  detail::Node* bn = beta.node().get();
  const float* X = x.data().data();
  const float* G = gamma.data().data();
  const float* B = beta.data().data();

  std::vector<float> mu(C), inv(C);
  if (mode == BnMode::Eval) {
    check(stats.initialized, "batchnorm: uninitialized running statistics");
    for (int c = 0; c < C; ++c) {
      mu[c] = stats.mean[c];
      inv[c] = 1.0f / std::sqrt(stats.var[c] + eps);
    }
  } else {
    std::vector<double> sum(C, 0.0), sq(C, 0.0);
    for (int j = 0; j < m; ++j) {
      const float* row = X + size_t(j) * C;
      for (int c = 0; c < C; ++c) {
        sum[c] += row[c];
        sq[c] += double(row[c]) * row[c];
      }
    }
    std::vector<float> var(C);
    for (int c = 0; c < C; ++c) {
      const double mean = sum[c] / m;
      double v = sq[c] / m - mean * mean;
      if (v < 0.0) v = 0.0;  // guard rounding
      mu[c] = float(mean);
      var[c] = float(v);
      inv[c] = float(1.0 / std::sqrt(v + eps));
    }
    // Running stats: first train batch seeds them, then EMA (biased variance).
    if (!stats.initialized) {
      stats.mean = mu;
      stats.var = var;
      stats.initialized = true;
    } else {
      for (int c = 0; c < C; ++c) {
        stats.mean[c] = (1.0f - momentum) * stats.mean[c] + momentum * mu[c];
        stats.var[c] = (1.0f - momentum) * stats.var[c] + momentum * var[c];
      }
    }
  }

  // xhat cached for the train-mode backward.
  auto xhat = std::make_shared<std::vector<float>>(size_t(m) * C);
  {
    float* XH = xhat->data();
    for (int j = 0; j < m; ++j) {
      const float* row = X + size_t(j) * C;
      float* xh = XH + size_t(j) * C;
      for (int c = 0; c < C; ++c) xh[c] = (row[c] - mu[c]) * inv[c];
    }
  }

  const bool train = mode == BnMode::Train;
  Tensor out = make_op(is, {x, gamma, beta},
                       [m, C, in, gn, bn, xhat, inv, train](detail::Node& self) {
    const float* GY = self.grad.data();
    const float* XH = xhat->data();
    const float* G = gn->value.data();
    if (gn->requires_grad || bn->requires_grad) {
      std::vector<double> dg(C, 0.0), db(C, 0.0);
      for (int j = 0; j < m; ++j) {
        const float* gy = GY + size_t(j) * C;
        const float* xh = XH + size_t(j) * C;
        for (int c = 0; c < C; ++c) {
          dg[c] += double(gy[c]) * xh[c];
          db[c] += gy[c];
        }
      }
      if (gn->requires_grad)
        for (int c = 0; c < C; ++c) gn->grad[c] += float(dg[c]);
      if (bn->requires_grad)
        for (int c = 0; c < C; ++c) bn->grad[c] += float(db[c]);
    }
    if (!in->requires_grad) return;
    float* DX = in->grad.data();
    if (!train) {
      // Eval mode is a per-channel affine map.
      for (int j = 0; j < m; ++j) {
        const float* gy = GY + size_t(j) * C;
        float* dx = DX + size_t(j) * C;
        for (int c = 0; c < C; ++c) dx[c] += gy[c] * G[c] * inv[c];
      }
      return;
    }
    // Train mode: dx = inv/m * (m*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
    std::vector<double> s1(C, 0.0), s2(C, 0.0);
    for (int j = 0; j < m; ++j) {
      const float* gy = GY + size_t(j) * C;
      const float* xh = XH + size_t(j) * C;
      for (int c = 0; c < C; ++c) {
        const double dxh = double(gy[c]) * G[c];
        s1[c] += dxh;
        s2[c] += dxh * xh[c];
      }
    }
    for (int j = 0; j < m; ++j) {
      const float* gy = GY + size_t(j) * C;
      const float* xh = XH + size_t(j) * C;
      float* dx = DX + size_t(j) * C;
      for (int c = 0; c < C; ++c) {
        const double dxh = double(gy[c]) * G[c];
        dx[c] += float(double(inv[c]) / m * (m * dxh - s1[c] - double(xh[c]) * s2[c]));
      }
    }
  });

  float* Y = out.data().data();
  const float* XH = xhat->data();
  for (int j = 0; j < m; ++j) {
    const float* xh = XH + size_t(j) * C;
    float* y = Y + size_t(j) * C;
    for (int c = 0; c < C; ++c) y[c] = G[c] * xh[c] + B[c];
  }
  return out;
}

// ==== pool ==================================================================

Tensor pool(const Tensor& x, PoolKind kind, int window) {
  const Shape& is = x.shape();
  check(is.size() == 3 || is.size() == 4, "pool: input must be rank 3 or 4, got " + shape_str(is));
  const bool batched = is.size() == 4;
  const int N = batched ? is[0] : 1;
  const int H = is[batched ? 1 : 0], W = is[batched ? 2 : 1], C = is[batched ? 3 : 2];
  detail::Node* in = x.node().get();
  const float* X = x.data().data();

  if (kind == PoolKind::ChannelAvg) {
    Shape oshape = batched ? Shape{N, H, W, 1} : Shape{H, W, 1};
    Tensor out = make_op(std::move(oshape), {x}, [N, H, W, C, in](detail::Node& self) {
      if (!in->requires_grad) return;
      const float* GY = self.grad.data();
      float* DX = in->grad.data();
      const size_t cells = size_t(N) * H * W;
      for (size_t j = 0; j < cells; ++j) {
        const float g = GY[j] / float(C);
        float* dx = DX + j * C;
        for (int c = 0; c < C; ++c) dx[c] += g;
      }
    });
    float* Y = out.data().data();
    const size_t cells = size_t(N) * H * W;
    for (size_t j = 0; j < cells; ++j) {
      const float* xv = X + j * C;
      double s = 0.0;
      for (int c = 0; c < C; ++c) s += xv[c];
      Y[j] = float(s / C);
    }
    return out;
  }

  if (kind == PoolKind::GlobalAvg) {
    Shape oshape = batched ? Shape{N, 1, 1, C} : Shape{1, 1, C};
    Tensor out = make_op(std::move(oshape), {x}, [N, H, W, C, in](detail::Node& self) {
      if (!in->requires_grad) return;
      const float* GY = self.grad.data();
      float* DX = in->grad.data();
      const int hw = H * W;
      for (int n = 0; n < N; ++n) {
        const float* gy = GY + size_t(n) * C;
        float* dxn = DX + size_t(n) * hw * C;
        for (int j = 0; j < hw; ++j) {
          float* dx = dxn + size_t(j) * C;
          for (int c = 0; c < C; ++c) dx[c] += gy[c] / float(hw);
        }
      }
    });
    float* Y = out.data().data();
    const int hw = H * W;
    for (int n = 0; n < N; ++n) {
      const float* xn = X + size_t(n) * hw * C;
      std::vector<double> s(C, 0.0);
      for (int j = 0; j < hw; ++j) {
        const float* xv = xn + size_t(j) * C;
        for (int c = 0; c < C; ++c) s[c] += xv[c];
      }
      float* y = Y + size_t(n) * C;
      for (int c = 0; c < C; ++c) y[c] = float(s[c] / hw);
    }
    return out;
  }

  // Max / Avg with square window.
  check(window >= 1, "pool: window must be >= 1");
  check(window <= H && window <= W, "pool: window " + std::to_string(window) +
                                        " > spatial extent of " + shape_str(is));
  check(H % window == 0 && W % window == 0,
        "pool: window " + std::to_string(window) + " must divide spatial extents " + shape_str(is));
  const int Ho = H / window, Wo = W / window;
  Shape oshape = batched ? Shape{N, Ho, Wo, C} : Shape{Ho, Wo, C};

  if (kind == PoolKind::Max) {
    auto argmax = std::make_shared<std::vector<int>>(size_t(N) * Ho * Wo * C);
    Tensor out = make_op(std::move(oshape), {x}, [in, argmax](detail::Node& self) {
      if (!in->requires_grad) return;
      const float* GY = self.grad.data();
      float* DX = in->grad.data();
      const std::vector<int>& am = *argmax;
      for (size_t i = 0; i < am.size(); ++i) DX[am[i]] += GY[i];
    });
    float* Y = out.data().data();
    int* AM = argmax->data();
    for (int n = 0; n < N; ++n) {
      for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
          for (int c = 0; c < C; ++c) {
            float best = -std::numeric_limits<float>::infinity();
            int best_at = 0;
            for (int ky = 0; ky < window; ++ky) {
              for (int kx = 0; kx < window; ++kx) {
                const int at =
                    int(((size_t(n) * H + size_t(oy) * window + ky) * W + size_t(ox) * window + kx) * C + c);
                if (X[at] > best) {
                  best = X[at];
                  best_at = at;
                }
              }
            }
            const size_t oat = ((size_t(n) * Ho + oy) * Wo + ox) * C + c;
            Y[oat] = best;
            AM[oat] = best_at;
          }
        }
      }
    }
    return out;
  }

  check(kind == PoolKind::Avg, "pool: unknown kind");
  Tensor out = make_op(std::move(oshape), {x}, [N, H, W, C, Ho, Wo, window, in](detail::Node& self) {
    if (!in->requires_grad) return;
    const float* GY = self.grad.data();
    float* DX = in->grad.data();
    const float scale = 1.0f / float(window * window);
    for (int n = 0; n < N; ++n) {
      for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
          const float* gy = GY + ((size_t(n) * Ho + oy) * Wo + ox) * C;
          for (int ky = 0; ky < window; ++ky) {
            for (int kx = 0; kx < window; ++kx) {
              float* dx = DX + ((size_t(n) * H + size_t(oy) * window + ky) * W +
                                size_t(ox) * window + kx) * C;
              for (int c = 0; c < C; ++c) dx[c] += gy[c] * scale;
            }
          }
        }
      }
    }
  });
  float* Y = out.data().data();
  for (int n = 0; n < N; ++n) {
    for (int oy = 0; oy < Ho; ++oy) {
      for (int ox = 0; ox < Wo; ++ox) {
        std::vector<double> s(C, 0.0);
        for (int ky = 0; ky < window; ++ky) {
          for (int kx = 0; kx < window; ++kx) {
            const float* xv = X + ((size_t(n) * H + size_t(oy) * window + ky) * W +
                                   size_t(ox) * window + kx) * C;
            for (int c = 0; c < C; ++c) s[c] += xv[c];
          }
        }
        float* y = Y + ((size_t(n) * Ho + oy) * Wo + ox) * C;
        for (int c = 0; c < C; ++c) y[c] = float(s[c] / (window * window));
      }
    }
  }
  return out;
}

// ==== activate ==============================================================

Tensor activate(const Tensor& x, Act kind, float alpha) {
  detail::Node* in = x.node().get();
  const size_t n = size_t(x.size());

  Tensor out = make_op(x.shape(), {x}, [in, kind, alpha](detail::Node& self) {
    if (!in->requires_grad) return;
    const float* GY = self.grad.data();
    const float* X = in->value.data();
    const float* Y = self.value.data();
    float* DX = in->grad.data();
    const size_t count = self.value.size();
    switch (kind) {
      case Act::Relu:
        for (size_t i = 0; i < count; ++i) DX[i] += X[i] > 0.0f ? GY[i] : 0.0f;
        break;
      case Act::LeakyRelu:
        for (size_t i = 0; i < count; ++i) DX[i] += GY[i] * (X[i] > 0.0f ? 1.0f : alpha);
        break;
      case Act::Sigmoid:
        for (size_t i = 0; i < count; ++i) DX[i] += GY[i] * Y[i] * (1.0f - Y[i]);
        break;
    }
  });

  const float* X = x.data().data();
  float* Y = out.data().data();
  switch (kind) {
    case Act::Relu:
      for (size_t i = 0; i < n; ++i) Y[i] = X[i] > 0.0f ? X[i] : 0.0f;
      break;
    case Act::LeakyRelu:
      for (size_t i = 0; i < n; ++i) Y[i] = X[i] > 0.0f ? X[i] : alpha * X[i];
      break;
    case Act::Sigmoid: {
      // Computed in double with a sign branch so huge |x| neither overflows
      // nor collapses to exactly 0/1: output clamped strictly inside (0,1).
      const float lo = std::numeric_limits<float>::denorm_min();
      const float hi = std::nextafter(1.0f, 0.0f);
      for (size_t i = 0; i < n; ++i) {
        const double t = double(X[i]);
        double s;
        if (t >= 0.0) {
          s = 1.0 / (1.0 + std::exp(-t));
        } else {
          const double e = std::exp(t);
          s = e / (1.0 + e);
        }
        Y[i] = std::min(std::max(float(s), lo), hi);
      }
      break;
    }
  }
  return out;
}

// ==== elementwise ===========================================================

Tensor elementwise(const Tensor& a, const Tensor& b, EwKind kind) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  bool equal = as == bs;
  bool bcast = false;
  if (!equal) {
    bcast = as.size() == bs.size() && bs.back() == 1;
    for (size_t i = 0; bcast && i + 1 < as.size(); ++i) bcast = as[i] == bs[i];
    check(bcast, "elementwise: incompatible shapes " + shape_str(as) + " and " + shape_str(bs));
  }
  const int C = as.back();
  const int outer = shape_size(as) / C;
  detail::Node* an = a.node().get();
  detail::Node* bn = b.node().get();

  Tensor out = make_op(as, {a, b}, [outer, C, equal, kind, an, bn](detail::Node& self) {
    const float* GY = self.grad.data();
    const float* A = an->value.data();
    const float* B = bn->value.data();
    const bool need_da = an->requires_grad;
    const bool need_db = bn->requires_grad;
    if (kind == EwKind::Add) {
      if (need_da) {
        float* da = an->grad.data();
        const size_t total = size_t(outer) * C;
        for (size_t i = 0; i < total; ++i) da[i] += GY[i];
      }
      if (need_db) {
        float* db = bn->grad.data();
        if (equal) {
          const size_t total = size_t(outer) * C;
          for (size_t i = 0; i < total; ++i) db[i] += GY[i];
        } else {
          for (int j = 0; j < outer; ++j) {
            double s = 0.0;
            const float* gy = GY + size_t(j) * C;
            for (int c = 0; c < C; ++c) s += gy[c];
            db[j] += float(s);
          }
        }
      }
      return;
    }
    // Mul.
    if (need_da) {
      float* da = an->grad.data();
      if (equal) {
        const size_t total = size_t(outer) * C;
        for (size_t i = 0; i < total; ++i) da[i] += GY[i] * B[i];
      } else {
        for (int j = 0; j < outer; ++j) {
          const float bv = B[j];
          const float* gy = GY + size_t(j) * C;
          float* da_j = da + size_t(j) * C;
          for (int c = 0; c < C; ++c) da_j[c] += gy[c] * bv;
        }
      }
    }
    if (need_db) {
      float* db = bn->grad.data();
      if (equal) {
        const size_t total = size_t(outer) * C;
        for (size_t i = 0; i < total; ++i) db[i] += GY[i] * A[i];
      } else {
        for (int j = 0; j < outer; ++j) {
          double s = 0.0;
          const float* gy = GY + size_t(j) * C;
          const float* av = A + size_t(j) * C;
          for (int c = 0; c < C; ++c) s += double(gy[c]) * av[c];
          db[j] += float(s);
        }
      }
    }
  });

  const float* A = a.data().data();
  const float* B = b.data().data();
  float* Y = out.data().data();
  if (equal) {
    const size_t total = size_t(outer) * C;
    if (kind == EwKind::Add)
      for (size_t i = 0; i < total; ++i) Y[i] = A[i] + B[i];
    else
      for (size_t i = 0; i < total; ++i) Y[i] = A[i] * B[i];
  } else {
    for (int j = 0; j < outer; ++j) {
      const float bv = B[j];
      const float* av = A + size_t(j) * C;
      float* y = Y + size_t(j) * C;
      if (kind == EwKind::Add)
        for (int c = 0; c < C; ++c) y[c] = av[c] + bv;
      else
        for (int c = 0; c < C; ++c) y[c] = av[c] * bv;
    }
  }
  return out;
}

Tensor add_scalar(const Tensor& x, float cval) {
  detail::Node* in = x.node().get();
  Tensor out = make_op(x.shape(), {x}, [in](detail::Node& self) {
    if (!in->requires_grad) return;
    const float* GY = self.grad.data();
    float* DX = in->grad.data();
    for (size_t i = 0; i < self.value.size(); ++i) DX[i] += GY[i];
  });
  const float* X = x.data().data();
  float* Y = out.data().data();
  for (size_t i = 0; i < out.data().size(); ++i) Y[i] = X[i] + cval;
  return out;
}

// ==== concat / pad / flatten / fc ===========================================

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  check(as.size() == bs.size() && (as.size() == 3 || as.size() == 4),
        "concat_channels: ranks must match (3 or 4), got " + shape_str(as) + " and " + shape_str(bs));
  for (size_t i = 0; i + 1 < as.size(); ++i)
    check(as[i] == bs[i], "concat_channels: leading extents differ, " + shape_str(as) + " vs " +
                              shape_str(bs));
  const int Ca = as.back(), Cb = bs.back();
  Shape oshape = as;
  oshape.back() = Ca + Cb;
  const int outer = shape_size(as) / Ca;
  detail::Node* an = a.node().get();
  detail::Node* bn = b.node().get();

  Tensor out = make_op(std::move(oshape), {a, b}, [outer, Ca, Cb, an, bn](detail::Node& self) {
    const float* GY = self.grad.data();
    const int C = Ca + Cb;
    if (an->requires_grad) {
      float* da = an->grad.data();
      for (int j = 0; j < outer; ++j) {
        const float* gy = GY + size_t(j) * C;
        float* d = da + size_t(j) * Ca;
        for (int c = 0; c < Ca; ++c) d[c] += gy[c];
      }
    }
    if (bn->requires_grad) {
      float* db = bn->grad.data();
      for (int j = 0; j < outer; ++j) {
        const float* gy = GY + size_t(j) * C + Ca;
        float* d = db + size_t(j) * Cb;
        for (int c = 0; c < Cb; ++c) d[c] += gy[c];
      }
    }
  });

  const float* A = a.data().data();
  const float* B = b.data().data();
  float* Y = out.data().data();
  for (int j = 0; j < outer; ++j) {
    std::memcpy(Y + size_t(j) * (Ca + Cb), A + size_t(j) * Ca, sizeof(float) * Ca);
    std::memcpy(Y + size_t(j) * (Ca + Cb) + Ca, B + size_t(j) * Cb, sizeof(float) * Cb);
  }
  return out;
}

Tensor pad_channels(const Tensor& x, int extra) {
  check(extra >= 0, "pad_channels: extra must be >= 0");
  if (extra == 0) return x;
  const Shape& is = x.shape();
  const int C = is.back();
  Shape oshape = is;
  oshape.back() = C + extra;
  const int outer = shape_size(is) / C;
  detail::Node* in = x.node().get();

  Tensor out = make_op(std::move(oshape), {x}, [outer, C, extra, in](detail::Node& self) {
    if (!in->requires_grad) return;
    const float* GY = self.grad.data();
    float* dx = in->grad.data();
    for (int j = 0; j < outer; ++j) {
      const float* gy = GY + size_t(j) * (C + extra);
      float* d = dx + size_t(j) * C;
      for (int c = 0; c < C; ++c) d[c] += gy[c];
    }
  });
  const float* X = x.data().data();
  float* Y = out.data().data();
  for (int j = 0; j < outer; ++j)
    std::memcpy(Y + size_t(j) * (C + extra), X + size_t(j) * C, sizeof(float) * C);
  return out;
}

Tensor flatten(const Tensor& x) {
  const Shape& is = x.shape();
  Shape oshape;
  if (is.size() == 4)
    oshape = {is[0], is[1] * is[2] * is[3]};
  else
    oshape = {shape_size(is)};
  detail::Node* in = x.node().get();
  Tensor out = make_op(std::move(oshape), {x}, [in](detail::Node& self) {
    if (!in->requires_grad) return;
    const float* GY = self.grad.data();
    float* dx = in->grad.data();
    for (size_t i = 0; i < self.value.size(); ++i) dx[i] += GY[i];
  });
  std::memcpy(out.data().data(), x.data().data(), sizeof(float) * x.data().size());
  return out;
}

Tensor fully_connected(const Tensor& x, const Tensor& w) {
  const Shape& is = x.shape();
  const Shape& ws = w.shape();
  check(ws.size() == 2, "fully_connected: weights must be rank 2, got " + shape_str(ws));
  check(is.size() == 1 || is.size() == 2,
        "fully_connected: input must be rank 1 or 2, got " + shape_str(is));
  const bool batched = is.size() == 2;
  const int N = batched ? is[0] : 1;
  const int D = batched ? is[1] : is[0];
  const int K = ws[1];
  check(ws[0] == D, "fully_connected: input " + shape_str(is) + " vs weights " + shape_str(ws));
  Shape oshape = batched ? Shape{N, K} : Shape{K};
  detail::Node* in = x.node().get();
  detail::Node* wn = w.node().get();

  Tensor out = make_op(std::move(oshape), {x, w}, [N, D, K, in, wn](detail::Node& self) {
    const float* GY = self.grad.data();
    const float* X = in->value.data();
    const float* W = wn->value.data();
    if (in->requires_grad) {
      float* dx = in->grad.data();
      for (int n = 0; n < N; ++n) {
        const float* gy = GY + size_t(n) * K;
        float* dxn = dx + size_t(n) * D;
        for (int d = 0; d < D; ++d) {
          const float* wr = W + size_t(d) * K;
          float s = 0.0f;
          for (int k = 0; k < K; ++k) s += wr[k] * gy[k];
          dxn[d] += s;
        }
      }
    }
    if (wn->requires_grad) {
      float* dw = wn->grad.data();
      for (int n = 0; n < N; ++n) {
        const float* gy = GY + size_t(n) * K;
        const float* xn = X + size_t(n) * D;
        for (int d = 0; d < D; ++d) {
          const float v = xn[d];
          float* dwr = dw + size_t(d) * K;
          for (int k = 0; k < K; ++k) dwr[k] += v * gy[k];
        }
      }
    }
  });

  const float* X = x.data().data();
  const float* W = w.data().data();
  float* Y = out.data().data();
  for (int n = 0; n < N; ++n) {
    const float* xn = X + size_t(n) * D;
    float* y = Y + size_t(n) * K;
    for (int d = 0; d < D; ++d) {
      const float v = xn[d];
      const float* wr = W + size_t(d) * K;
      for (int k = 0; k < K; ++k) y[k] += v * wr[k];
    }
  }
  return out;
}

// ==== losses ================================================================

Tensor bce(const Tensor& pred, const std::vector<float>& labels) {
  const int n = int(labels.size());
  check(n > 0, "bce: empty labels");
  check(pred.size() == n, "bce: pred " + shape_str(pred.shape()) + " vs " + std::to_string(n) +
                              " labels");
  const float* P = pred.data().data();
  for (int i = 0; i < n; ++i)
    check(P[i] >= 0.0f && P[i] <= 1.0f,
          "bce: prediction " + std::to_string(P[i]) + " outside [0,1]");
  auto pc = std::make_shared<std::vector<float>>(size_t(n));
  auto ycopy = std::make_shared<std::vector<float>>(labels);
  constexpr float kLo = 1e-7f, kHi = 1.0f - 1e-7f;
  for (int i = 0; i < n; ++i) (*pc)[i] = std::min(std::max(P[i], kLo), kHi);

  detail::Node* pn = pred.node().get();
  Tensor out = make_op({1}, {pred}, [n, pc, ycopy, pn](detail::Node& self) {
    if (!pn->requires_grad) return;
    const float g = self.grad[0];
    float* dp = pn->grad.data();
    for (int i = 0; i < n; ++i) {
      const double p = (*pc)[i], y = (*ycopy)[i];
      dp[i] += float(g * (-y / p + (1.0 - y) / (1.0 - p)) / n);
    }
  });
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double p = (*pc)[i], y = (*ycopy)[i];
    loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  out.data()[0] = float(loss / n);
  return out;
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  check(pred.shape() == target.shape(), "l1_loss: shape mismatch " + shape_str(pred.shape()) +
                                            " vs " + shape_str(target.shape()));
  const size_t n = pred.data().size();
  detail::Node* pn = pred.node().get();
  detail::Node* tn = target.node().get();
  Tensor out = make_op({1}, {pred, target}, [n, pn, tn](detail::Node& self) {
    const float g = self.grad[0];
    const float* P = pn->value.data();
    const float* T = tn->value.data();
    const float scale = g / float(n);
    if (pn->requires_grad) {
      float* dp = pn->grad.data();
      for (size_t i = 0; i < n; ++i) {
        const float dv = P[i] - T[i];
        dp[i] += dv > 0.0f ? scale : (dv < 0.0f ? -scale : 0.0f);
      }
    }
    if (tn->requires_grad) {
      float* dt = tn->grad.data();
      for (size_t i = 0; i < n; ++i) {
        const float dv = P[i] - T[i];
        dt[i] += dv > 0.0f ? -scale : (dv < 0.0f ? scale : 0.0f);
      }
    }
  });
  const float* P = pred.data().data();
  const float* T = target.data().data();
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) s += std::abs(double(P[i]) - double(T[i]));
  out.data()[0] = float(s / double(n));
  return out;
}

Tensor sum(const Tensor& x) {
  const size_t n = x.data().size();
  detail::Node* in = x.node().get();
  Tensor out = make_op({1}, {x}, [n, in](detail::Node& self) {
    if (!in->requires_grad) return;
    const float g = self.grad[0];
    float* dx = in->grad.data();
    for (size_t i = 0; i < n; ++i) dx[i] += g;
  });
  double s = 0.0;
  const float* X = x.data().data();
  for (size_t i = 0; i < n; ++i) s += X[i];
  out.data()[0] = float(s);
  return out;
}

}  // namespace leanet
