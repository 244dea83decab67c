// Finite-difference gradient battery: production autodiff vs double-precision
// central differences taken on the independent oracle forwards.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "leanet/prng.hpp"
#include "leanet/tensor.hpp"
#include "oracles.hpp"

namespace gradcheck {

using leanet::Shape;
using leanet::Tensor;

struct Case {
  std::string name;
  std::vector<Tensor> params;  // requires_grad inputs, checked in order
  std::function<Tensor()> prod_loss;  // called exactly once
  std::function<double(const std::vector<std::vector<double>>&)> oracle_loss;
  int max_coords = 60;  // per-parameter sample cap
  double h = 1e-4;
};

struct Result {
  int cases = 0;
  int coords = 0;
  double max_rel = 0.0;
  double forward_max_rel = 0.0;
  std::vector<std::string> failures;
};

inline std::vector<float> rand_vec(size_t n, leanet::Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  std::vector<float> v(n);
  for (float& f : v) f = rng.uniform(lo, hi);
  return v;
}

inline std::vector<double> to_d(const std::vector<float>& v) {
  return std::vector<double>(v.begin(), v.end());
}

// Relative error with a 1e-4 floor: coordinates whose gradient magnitude is
// below the float working precision are compared absolutely.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

inline Result run_battery(const std::vector<Case>& cases, double tol = 1e-3) {
  Result r;
  for (const Case& c : cases) {
    std::vector<std::vector<double>> dp;
    dp.reserve(c.params.size());
    for (const Tensor& p : c.params) dp.push_back(to_d(p.data()));

    Tensor loss = c.prod_loss();
    const double prod_val = loss.scalar();
    const double oracle_val = c.oracle_loss(dp);
    const double frel =
        std::abs(prod_val - oracle_val) / std::max({std::abs(prod_val), std::abs(oracle_val), 1e-6});
    r.forward_max_rel = std::max(r.forward_max_rel, frel);
    if (frel > 1e-3) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s: forward prod=%.8g oracle=%.8g", c.name.c_str(),
                    prod_val, oracle_val);
      r.failures.push_back(buf);
    }
    leanet::backward(loss);

    leanet::Rng coord_rng(leanet::derive_seed(0xC0FFEE, c.name));
    for (size_t pi = 0; pi < c.params.size(); ++pi) {
      const std::vector<float>& g = c.params[pi].grad();
      const size_t n = g.size();
      std::vector<size_t> coords;
      if (int(n) <= c.max_coords) {
        coords.resize(n);
        std::iota(coords.begin(), coords.end(), size_t(0));
      } else {
        for (int j = 0; j < c.max_coords; ++j) coords.push_back(size_t(coord_rng.next_below(n)));
      }
      for (size_t j : coords) {
        const double save = dp[pi][j];
        dp[pi][j] = save + c.h;
        const double up = c.oracle_loss(dp);
        dp[pi][j] = save - c.h;
        const double dn = c.oracle_loss(dp);
        dp[pi][j] = save;
        const double num = (up - dn) / (2.0 * c.h);
        const double ana = g[j];
        const double rel = rel_err(ana, num);
        ++r.coords;
        r.max_rel = std::max(r.max_rel, rel);
        if (rel > tol) {
          char buf[200];
          std::snprintf(buf, sizeof(buf), "%s: param %zu coord %zu analytic=%.8g numeric=%.8g rel=%.3g",
                        c.name.c_str(), pi, j, ana, num, rel);
          r.failures.push_back(buf);
        }
      }
    }
    ++r.cases;
  }
  return r;
}

// ---- case factories --------------------------------------------------------

inline Case conv_case(const std::string& name, uint64_t seed, int N, int H, int W, int Ci, int k,
                      int Co, int stride, int pad, bool rank3) {
  leanet::Rng rng(seed);
  const size_t xn = size_t(N) * H * W * Ci;
  Tensor x = Tensor::from_data(rank3 ? Shape{H, W, Ci} : Shape{N, H, W, Ci}, rand_vec(xn, rng));
  x.set_requires_grad(true);
  Tensor ker = Tensor::from_data({k, k, Ci, Co}, rand_vec(size_t(k) * k * Ci * Co, rng));
  ker.set_requires_grad(true);
  const int Ho = (H + 2 * pad - k) / stride + 1, Wo = (W + 2 * pad - k) / stride + 1;
  const std::vector<float> wfix = rand_vec(size_t(N) * Ho * Wo * Co, rng);

  Case c;
  c.name = name;
  c.params = {x, ker};
  c.prod_loss = [x, ker, stride, pad, wfix]() {
    Tensor y = leanet::conv2d(x, ker, stride, pad);
    return leanet::sum(leanet::mul(y, Tensor::from_data(y.shape(), wfix)));
  };
  c.oracle_loss = [N, H, W, Ci, k, Co, stride, pad, wfix](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(N, H, W, Ci, p[0]);
    oracle::T K = oracle::from_flat(k, k, Ci, Co, p[1]);
    return oracle::wsum(oracle::conv2d(X, K, stride, pad), to_d(wfix));
  };
  return c;
}

inline Case depthwise_case(const std::string& name, uint64_t seed, int N, int H, int W, int C,
                           int k, int stride, int pad) {
  leanet::Rng rng(seed);
  Tensor x = Tensor::from_data({N, H, W, C}, rand_vec(size_t(N) * H * W * C, rng));
  x.set_requires_grad(true);
  Tensor ker = Tensor::from_data({k, k, C, 1}, rand_vec(size_t(k) * k * C, rng));
  ker.set_requires_grad(true);
  const int Ho = (H + 2 * pad - k) / stride + 1, Wo = (W + 2 * pad - k) / stride + 1;
  const std::vector<float> wfix = rand_vec(size_t(N) * Ho * Wo * C, rng);

  Case c;
  c.name = name;
  c.params = {x, ker};
  c.prod_loss = [x, ker, stride, pad, wfix]() {
    Tensor y = leanet::depthwise_conv2d(x, ker, stride, pad);
    return leanet::sum(leanet::mul(y, Tensor::from_data(y.shape(), wfix)));
  };
  c.oracle_loss = [N, H, W, C, k, stride, pad, wfix](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(N, H, W, C, p[0]);
    oracle::T K = oracle::from_flat(k, k, C, 1, p[1]);
    return oracle::wsum(oracle::depthwise_conv2d(X, K, stride, pad), to_d(wfix));
  };
  return c;
}

inline Case convt_case(const std::string& name, uint64_t seed, int N, int H, int W, int Ci, int k,
                       int Co, bool rank3) {
  leanet::Rng rng(seed);
  const size_t xn = size_t(N) * H * W * Ci;
  Tensor x = Tensor::from_data(rank3 ? Shape{H, W, Ci} : Shape{N, H, W, Ci}, rand_vec(xn, rng));
  x.set_requires_grad(true);
  Tensor ker = Tensor::from_data({k, k, Ci, Co}, rand_vec(size_t(k) * k * Ci * Co, rng));
  ker.set_requires_grad(true);
  const std::vector<float> wfix = rand_vec(size_t(N) * H * k * W * k * Co, rng);

  Case c;
  c.name = name;
  c.params = {x, ker};
  c.prod_loss = [x, ker, k, wfix]() {
    Tensor y = leanet::conv2d_transpose(x, ker, k);
    return leanet::sum(leanet::mul(y, Tensor::from_data(y.shape(), wfix)));
  };
  c.oracle_loss = [N, H, W, Ci, k, Co, wfix](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(N, H, W, Ci, p[0]);
    oracle::T K = oracle::from_flat(k, k, Ci, Co, p[1]);
    return oracle::wsum(oracle::conv2d_transpose(X, K, k), to_d(wfix));
  };
  return c;
}

inline Case bias_case(const std::string& name, uint64_t seed, int N, int H, int W, int C) {
  leanet::Rng rng(seed);
  Tensor x = Tensor::from_data({N, H, W, C}, rand_vec(size_t(N) * H * W * C, rng));
  x.set_requires_grad(true);
  Tensor b = Tensor::from_data({C}, rand_vec(size_t(C), rng));
  b.set_requires_grad(true);
  const std::vector<float> wfix = rand_vec(size_t(N) * H * W * C, rng);

  Case c;
  c.name = name;
  c.params = {x, b};
  c.prod_loss = [x, b, wfix]() {
    Tensor y = leanet::add_channel_bias(x, b);
    return leanet::sum(leanet::mul(y, Tensor::from_data(y.shape(), wfix)));
  };
  c.oracle_loss = [N, H, W, C, wfix](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(N, H, W, C, p[0]);
    return oracle::wsum(oracle::add_bias(X, p[1]), to_d(wfix));
  };
  return c;
}

inline Case bn_train_case(const std::string& name, uint64_t seed, int N, int H, int W, int C,
                          bool rank3) {
  leanet::Rng rng(seed);
  const size_t xn = size_t(N) * H * W * C;
  Tensor x = Tensor::from_data(rank3 ? Shape{H, W, C} : Shape{N, H, W, C}, rand_vec(xn, rng));
  x.set_requires_grad(true);
  Tensor gamma = Tensor::from_data({C}, rand_vec(size_t(C), rng, 0.5f, 1.5f));
  gamma.set_requires_grad(true);
  Tensor beta = Tensor::from_data({C}, rand_vec(size_t(C), rng, -0.5f, 0.5f));
  beta.set_requires_grad(true);
  const std::vector<float> wfix = rand_vec(xn, rng);
  auto stats = std::make_shared<leanet::BatchNormStats>();
  const double eps = double(1e-5f);

  Case c;
  c.name = name;
  c.params = {x, gamma, beta};
  c.prod_loss = [x, gamma, beta, stats, wfix]() {
    Tensor y = leanet::batchnorm(x, gamma, beta, leanet::BnMode::Train, *stats);
    return leanet::sum(leanet::mul(y, Tensor::from_data(y.shape(), wfix)));
  };
  c.oracle_loss = [N, H, W, C, wfix, eps](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(N, H, W, C, p[0]);
    return oracle::wsum(oracle::bn_train(X, p[1], p[2], eps), to_d(wfix));
  };
  return c;
}

inline Case bn_eval_case(const std::string& name, uint64_t seed, int N, int H, int W, int C) {
  leanet::Rng rng(seed);
  const size_t xn = size_t(N) * H * W * C;
  Tensor x = Tensor::from_data({N, H, W, C}, rand_vec(xn, rng));
  x.set_requires_grad(true);
  Tensor gamma = Tensor::from_data({C}, rand_vec(size_t(C), rng, 0.5f, 1.5f));
  gamma.set_requires_grad(true);
  Tensor beta = Tensor::from_data({C}, rand_vec(size_t(C), rng, -0.5f, 0.5f));
  beta.set_requires_grad(true);
  const std::vector<float> wfix = rand_vec(xn, rng);
  const double eps = double(1e-5f);

  // Prime running stats with one training pass on unrelated data.
  auto stats = std::make_shared<leanet::BatchNormStats>();
  Tensor prime = Tensor::from_data({N, H, W, C}, rand_vec(xn, rng, -2.0f, 2.0f));
  (void)leanet::batchnorm(prime, gamma, beta, leanet::BnMode::Train, *stats);
  const std::vector<double> mean = to_d(stats->mean);
  const std::vector<double> var = to_d(stats->var);

  Case c;
  c.name = name;
  c.params = {x, gamma, beta};
  c.prod_loss = [x, gamma, beta, stats, wfix]() {
    Tensor y = leanet::batchnorm(x, gamma, beta, leanet::BnMode::Eval, *stats);
    return leanet::sum(leanet::mul(y, Tensor::from_data(y.shape(), wfix)));
  };
  c.oracle_loss = [N, H, W, C, wfix, mean, var, eps](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(N, H, W, C, p[0]);
    return oracle::wsum(oracle::bn_eval(X, p[1], p[2], mean, var, eps), to_d(wfix));
  };
  return c;
}

inline Case pool_case(const std::string& name, uint64_t seed, int N, int H, int W, int C,
                      leanet::PoolKind kind, int window, bool rank3) {
  leanet::Rng rng(seed);
  const size_t xn = size_t(N) * H * W * C;
  std::vector<float> xdata = rand_vec(xn, rng);
  if (kind == leanet::PoolKind::Max) {
    // Enforce a top-two gap in every window so FD never straddles a tie.
    auto gap_ok = [&]() {
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
          for (int oy = 0; oy < H / window; ++oy)
            for (int ox = 0; ox < W / window; ++ox) {
              float top1 = -1e30f, top2 = -1e30f;
              for (int ky = 0; ky < window; ++ky)
                for (int kx = 0; kx < window; ++kx) {
                  const float v =
                      xdata[((size_t(n) * H + size_t(oy) * window + ky) * W + size_t(ox) * window + kx) * C + c];
                  if (v > top1) {
                    top2 = top1;
                    top1 = v;
                  } else if (v > top2) {
                    top2 = v;
                  }
                }
              if (top1 - top2 < 1e-3f) return false;
            }
      return true;
    };
    while (!gap_ok()) xdata = rand_vec(xn, rng);
  }
  Tensor x = Tensor::from_data(rank3 ? Shape{H, W, C} : Shape{N, H, W, C}, xdata);
  x.set_requires_grad(true);
  int on = 0;
  switch (kind) {
    case leanet::PoolKind::Max:
    case leanet::PoolKind::Avg:
      on = N * (H / window) * (W / window) * C;
      break;
    case leanet::PoolKind::GlobalAvg:
      on = N * C;
      break;
    case leanet::PoolKind::ChannelAvg:
      on = N * H * W;
      break;
  }
  const std::vector<float> wfix = rand_vec(size_t(on), rng);

  Case c;
  c.name = name;
  c.params = {x};
  c.prod_loss = [x, kind, window, wfix]() {
    Tensor y = leanet::pool(x, kind, window);
    return leanet::sum(leanet::mul(y, Tensor::from_data(y.shape(), wfix)));
  };
  c.oracle_loss = [N, H, W, C, kind, window, wfix](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(N, H, W, C, p[0]);
    oracle::T Y;
    switch (kind) {
      case leanet::PoolKind::Max: Y = oracle::pool_max(X, window); break;
      case leanet::PoolKind::Avg: Y = oracle::pool_avg(X, window); break;
      case leanet::PoolKind::GlobalAvg: Y = oracle::pool_global_avg(X); break;
      case leanet::PoolKind::ChannelAvg: Y = oracle::pool_channel_avg(X); break;
    }
    return oracle::wsum(Y, to_d(wfix));
  };
  return c;
}

inline Case act_case(const std::string& name, uint64_t seed, int N, int H, int W, int C,
                     leanet::Act kind, float alpha) {
  leanet::Rng rng(seed);
  const size_t xn = size_t(N) * H * W * C;
  std::vector<float> xdata(xn);
  for (float& v : xdata) {
    if (kind == leanet::Act::Sigmoid) {
      v = rng.uniform(-8.0f, 8.0f);
    } else {
      // keep a margin around the ReLU kink
      const float u = rng.uniform(-1.0f, 1.0f);
      v = (u < 0.0f ? -1.0f : 1.0f) * (0.02f + std::abs(u));
    }
  }
  Tensor x = Tensor::from_data({N, H, W, C}, xdata);
  x.set_requires_grad(true);
  const std::vector<float> wfix = rand_vec(xn, rng);

  Case c;
  c.name = name;
  c.params = {x};
  c.prod_loss = [x, kind, alpha, wfix]() {
    Tensor y = leanet::activate(x, kind, alpha);
    return leanet::sum(leanet::mul(y, Tensor::from_data(y.shape(), wfix)));
  };
  c.oracle_loss = [N, H, W, C, kind, alpha, wfix](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(N, H, W, C, p[0]);
    oracle::T Y;
    switch (kind) {
      case leanet::Act::Relu: Y = oracle::relu(X); break;
      case leanet::Act::LeakyRelu: Y = oracle::leaky_relu(X, double(alpha)); break;
      case leanet::Act::Sigmoid: Y = oracle::sigmoid(X); break;
    }
    return oracle::wsum(Y, to_d(wfix));
  };
  return c;
}

inline Case ew_case(const std::string& name, uint64_t seed, int N, int H, int W, int C,
                    leanet::EwKind kind, bool bcast) {
  leanet::Rng rng(seed);
  const size_t an = size_t(N) * H * W * C;
  const int Cb = bcast ? 1 : C;
  const size_t bn = size_t(N) * H * W * Cb;
  Tensor a = Tensor::from_data({N, H, W, C}, rand_vec(an, rng));
  a.set_requires_grad(true);
  Tensor b = Tensor::from_data({N, H, W, Cb}, rand_vec(bn, rng));
  b.set_requires_grad(true);
  const std::vector<float> wfix = rand_vec(an, rng);

  Case c;
  c.name = name;
  c.params = {a, b};
  c.prod_loss = [a, b, kind, wfix]() {
    Tensor y = leanet::elementwise(a, b, kind);
    return leanet::sum(leanet::mul(y, Tensor::from_data(y.shape(), wfix)));
  };
  c.oracle_loss = [N, H, W, C, Cb, kind, wfix](const std::vector<std::vector<double>>& p) {
    oracle::T A = oracle::from_flat(N, H, W, C, p[0]);
    oracle::T B = oracle::from_flat(N, H, W, Cb, p[1]);
    return oracle::wsum(oracle::ew(A, B, kind == leanet::EwKind::Mul), to_d(wfix));
  };
  return c;
}

inline Case add_scalar_case(const std::string& name, uint64_t seed, int H, int W, int C, float cv) {
  leanet::Rng rng(seed);
  const size_t xn = size_t(H) * W * C;
  Tensor x = Tensor::from_data({H, W, C}, rand_vec(xn, rng));
  x.set_requires_grad(true);
  const std::vector<float> wfix = rand_vec(xn, rng);

  Case c;
  c.name = name;
  c.params = {x};
  c.prod_loss = [x, cv, wfix]() {
    Tensor y = leanet::add_scalar(x, cv);
    return leanet::sum(leanet::mul(y, Tensor::from_data(y.shape(), wfix)));
  };
  c.oracle_loss = [H, W, C, cv, wfix](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(1, H, W, C, p[0]);
    for (double& d : X.v) d += double(cv);
    return oracle::wsum(X, to_d(wfix));
  };
  return c;
}

inline Case concat_case(const std::string& name, uint64_t seed, int N, int H, int W, int Ca, int Cb) {
  leanet::Rng rng(seed);
  Tensor a = Tensor::from_data({N, H, W, Ca}, rand_vec(size_t(N) * H * W * Ca, rng));
  a.set_requires_grad(true);
  Tensor b = Tensor::from_data({N, H, W, Cb}, rand_vec(size_t(N) * H * W * Cb, rng));
  b.set_requires_grad(true);
  const std::vector<float> wfix = rand_vec(size_t(N) * H * W * (Ca + Cb), rng);

  Case c;
  c.name = name;
  c.params = {a, b};
  c.prod_loss = [a, b, wfix]() {
    Tensor y = leanet::concat_channels(a, b);
    return leanet::sum(leanet::mul(y, Tensor::from_data(y.shape(), wfix)));
  };
  c.oracle_loss = [N, H, W, Ca, Cb, wfix](const std::vector<std::vector<double>>& p) {
    oracle::T A = oracle::from_flat(N, H, W, Ca, p[0]);
    oracle::T B = oracle::from_flat(N, H, W, Cb, p[1]);
    return oracle::wsum(oracle::concat(A, B), to_d(wfix));
  };
  return c;
}

inline Case pad_case(const std::string& name, uint64_t seed, int N, int H, int W, int C, int extra) {
  leanet::Rng rng(seed);
  Tensor x = Tensor::from_data({N, H, W, C}, rand_vec(size_t(N) * H * W * C, rng));
  x.set_requires_grad(true);
  const std::vector<float> wfix = rand_vec(size_t(N) * H * W * (C + extra), rng);

  Case c;
  c.name = name;
  c.params = {x};
  c.prod_loss = [x, extra, wfix]() {
    Tensor y = leanet::pad_channels(x, extra);
    return leanet::sum(leanet::mul(y, Tensor::from_data(y.shape(), wfix)));
  };
  c.oracle_loss = [N, H, W, C, extra, wfix](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(N, H, W, C, p[0]);
    return oracle::wsum(oracle::pad_channels(X, extra), to_d(wfix));
  };
  return c;
}

inline Case flatten_case(const std::string& name, uint64_t seed, int N, int H, int W, int C) {
  leanet::Rng rng(seed);
  const size_t xn = size_t(N) * H * W * C;
  Tensor x = Tensor::from_data({N, H, W, C}, rand_vec(xn, rng));
  x.set_requires_grad(true);
  const std::vector<float> wfix = rand_vec(xn, rng);

  Case c;
  c.name = name;
  c.params = {x};
  c.prod_loss = [x, wfix]() {
    Tensor y = leanet::flatten(x);
    return leanet::sum(leanet::mul(y, Tensor::from_data(y.shape(), wfix)));
  };
  c.oracle_loss = [N, H, W, C, wfix](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(N, H, W, C, p[0]);
    return oracle::wsum(X, to_d(wfix));  // flatten is a relayout
  };
  return c;
}

inline Case fc_case(const std::string& name, uint64_t seed, int N, int D, int K, bool rank1) {
  leanet::Rng rng(seed);
  const size_t xn = size_t(N) * D;
  Tensor x = Tensor::from_data(rank1 ? Shape{D} : Shape{N, D}, rand_vec(xn, rng));
  x.set_requires_grad(true);
  Tensor w = Tensor::from_data({D, K}, rand_vec(size_t(D) * K, rng));
  w.set_requires_grad(true);
  const std::vector<float> wfix = rand_vec(size_t(N) * K, rng);

  Case c;
  c.name = name;
  c.params = {x, w};
  c.prod_loss = [x, w, wfix]() {
    Tensor y = leanet::fully_connected(x, w);
    return leanet::sum(leanet::mul(y, Tensor::from_data(y.shape(), wfix)));
  };
  c.oracle_loss = [N, D, K, wfix](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(N, 1, 1, D, p[0]);
    return oracle::wsum(oracle::fc(X, p[1], K), to_d(wfix));
  };
  return c;
}

inline Case bce_case(const std::string& name, uint64_t seed, int n) {
  leanet::Rng rng(seed);
  Tensor logits = Tensor::from_data({n}, rand_vec(size_t(n), rng, -3.0f, 3.0f));
  logits.set_requires_grad(true);
  std::vector<float> labels(static_cast<size_t>(n));
  for (float& y : labels) y = rng.next_below(2) ? 1.0f : 0.0f;

  Case c;
  c.name = name;
  c.params = {logits};
  c.prod_loss = [logits, labels]() {
    return leanet::bce(leanet::activate(logits, leanet::Act::Sigmoid), labels);
  };
  c.oracle_loss = [n, labels](const std::vector<std::vector<double>>& p) {
    std::vector<double> preds(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) preds[size_t(i)] = 1.0 / (1.0 + std::exp(-p[0][size_t(i)]));
    return oracle::bce(preds, to_d(labels));
  };
  return c;
}

inline Case l1_case(const std::string& name, uint64_t seed, int H, int W, int C) {
  leanet::Rng rng(seed);
  const size_t n = size_t(H) * W * C;
  const std::vector<float> pdata = rand_vec(n, rng);
  std::vector<float> tdata(n);
  for (size_t i = 0; i < n; ++i) {
    const float u = rng.uniform(-1.0f, 1.0f);
    // offset keeps |pred - target| >= 0.1: safely away from the kink
    tdata[i] = pdata[i] + (u < 0.0f ? -1.0f : 1.0f) * (0.1f + std::abs(u));
  }
  Tensor pred = Tensor::from_data({H, W, C}, pdata);
  pred.set_requires_grad(true);
  Tensor target = Tensor::from_data({H, W, C}, tdata);
  target.set_requires_grad(true);

  Case c;
  c.name = name;
  c.params = {pred, target};
  c.prod_loss = [pred, target]() { return leanet::l1_loss(pred, target); };
  c.oracle_loss = [](const std::vector<std::vector<double>>& p) { return oracle::l1(p[0], p[1]); };
  return c;
}

inline Case sum_case(const std::string& name, uint64_t seed, int H, int W, int C) {
  leanet::Rng rng(seed);
  Tensor x = Tensor::from_data({H, W, C}, rand_vec(size_t(H) * W * C, rng));
  x.set_requires_grad(true);

  Case c;
  c.name = name;
  c.params = {x};
  c.prod_loss = [x]() { return leanet::sum(x); };
  c.oracle_loss = [H, W, C](const std::vector<std::vector<double>>& p) {
    return oracle::sum(oracle::from_flat(1, H, W, C, p[0]));
  };
  return c;
}

// conv -> bias -> relu -> maxpool -> conv -> gavg -> fc -> sigmoid -> bce
inline Case chain_cnn_case(uint64_t seed) {
  leanet::Rng rng(seed);
  Tensor x = Tensor::from_data({2, 8, 8, 3}, rand_vec(2 * 8 * 8 * 3, rng, -0.8f, 0.8f));
  x.set_requires_grad(true);
  Tensor k1 = Tensor::from_data({3, 3, 3, 8}, rand_vec(3 * 3 * 3 * 8, rng, -0.4f, 0.4f));
  k1.set_requires_grad(true);
  Tensor b1 = Tensor::from_data({8}, rand_vec(8, rng, -0.3f, 0.3f));
  b1.set_requires_grad(true);
  Tensor k2 = Tensor::from_data({3, 3, 8, 8}, rand_vec(3 * 3 * 8 * 8, rng, -0.3f, 0.3f));
  k2.set_requires_grad(true);
  Tensor w = Tensor::from_data({8, 1}, rand_vec(8, rng));
  w.set_requires_grad(true);
  const std::vector<float> labels = {1.0f, 0.0f};

  Case c;
  c.name = "chain_cnn[seed" + std::to_string(seed) + "]";
  c.h = 1e-6;  // tighter step keeps FD off the ReLU/max kinks
  c.params = {x, k1, b1, k2, w};
  c.prod_loss = [x, k1, b1, k2, w, labels]() {
    using namespace leanet;
    Tensor y = conv2d(x, k1, 1, 1);
    y = add_channel_bias(y, b1);
    y = activate(y, Act::Relu);
    y = pool(y, PoolKind::Max, 2);
    y = conv2d(y, k2, 2, 1);
    y = pool(y, PoolKind::GlobalAvg);
    y = flatten(y);
    y = fully_connected(y, w);
    y = activate(y, Act::Sigmoid);
    return bce(y, labels);
  };
  c.oracle_loss = [labels](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(2, 8, 8, 3, p[0]);
    oracle::T K1 = oracle::from_flat(3, 3, 3, 8, p[1]);
    oracle::T K2 = oracle::from_flat(3, 3, 8, 8, p[3]);
    oracle::T y = oracle::conv2d(X, K1, 1, 1);
    y = oracle::add_bias(y, p[2]);
    y = oracle::relu(y);
    y = oracle::pool_max(y, 2);
    y = oracle::conv2d(y, K2, 2, 1);
    y = oracle::pool_global_avg(y);
    std::vector<double> logits = oracle::fc(y, p[4], 1);
    for (double& t : logits) t = 1.0 / (1.0 + std::exp(-t));
    return oracle::bce(logits, to_d(labels));
  };
  return c;
}

// conv -> batchnorm(train) -> sigmoid -> gavg -> fc -> sigmoid -> bce
inline Case chain_bn_case(uint64_t seed) {
  leanet::Rng rng(seed);
  Tensor x = Tensor::from_data({4, 6, 6, 2}, rand_vec(4 * 6 * 6 * 2, rng));
  x.set_requires_grad(true);
  Tensor k = Tensor::from_data({3, 3, 2, 4}, rand_vec(3 * 3 * 2 * 4, rng, -0.5f, 0.5f));
  k.set_requires_grad(true);
  Tensor gamma = Tensor::from_data({4}, rand_vec(4, rng, 0.5f, 1.5f));
  gamma.set_requires_grad(true);
  Tensor beta = Tensor::from_data({4}, rand_vec(4, rng, -0.5f, 0.5f));
  beta.set_requires_grad(true);
  Tensor w = Tensor::from_data({4, 1}, rand_vec(4, rng));
  w.set_requires_grad(true);
  const std::vector<float> labels = {1.0f, 0.0f, 1.0f, 0.0f};
  auto stats = std::make_shared<leanet::BatchNormStats>();
  const double eps = double(1e-5f);

  Case c;
  c.name = "chain_bn[seed" + std::to_string(seed) + "]";
  c.h = 1e-6;
  c.params = {x, k, gamma, beta, w};
  c.prod_loss = [x, k, gamma, beta, w, labels, stats]() {
    using namespace leanet;
    Tensor y = conv2d(x, k, 1, 1);
    y = batchnorm(y, gamma, beta, BnMode::Train, *stats);
    y = activate(y, Act::Sigmoid);
    y = pool(y, PoolKind::GlobalAvg);
    y = flatten(y);
    y = fully_connected(y, w);
    y = activate(y, Act::Sigmoid);
    return bce(y, labels);
  };
  c.oracle_loss = [labels, eps](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(4, 6, 6, 2, p[0]);
    oracle::T K = oracle::from_flat(3, 3, 2, 4, p[1]);
    oracle::T y = oracle::conv2d(X, K, 1, 1);
    y = oracle::bn_train(y, p[2], p[3], eps);
    y = oracle::sigmoid(y);
    y = oracle::pool_global_avg(y);
    std::vector<double> logits = oracle::fc(y, p[4], 1);
    for (double& t : logits) t = 1.0 / (1.0 + std::exp(-t));
    return oracle::bce(logits, to_d(labels));
  };
  return c;
}

// two conv_transpose branches -> concat -> conv -> l1 against fixed target
inline Case chain_unetish_case(uint64_t seed) {
  leanet::Rng rng(seed);
  Tensor x = Tensor::from_data({1, 4, 4, 2}, rand_vec(4 * 4 * 2, rng));
  x.set_requires_grad(true);
  Tensor kt1 = Tensor::from_data({2, 2, 2, 3}, rand_vec(2 * 2 * 2 * 3, rng, -0.6f, 0.6f));
  kt1.set_requires_grad(true);
  Tensor kt2 = Tensor::from_data({2, 2, 2, 2}, rand_vec(2 * 2 * 2 * 2, rng, -0.6f, 0.6f));
  kt2.set_requires_grad(true);
  Tensor k3 = Tensor::from_data({3, 3, 5, 2}, rand_vec(3 * 3 * 5 * 2, rng, -0.4f, 0.4f));
  k3.set_requires_grad(true);
  const std::vector<float> tfix = rand_vec(8 * 8 * 2, rng, 1.5f, 3.5f);  // offset beyond outputs

  Case c;
  c.name = "chain_unetish[seed" + std::to_string(seed) + "]";
  c.h = 1e-6;
  c.params = {x, kt1, kt2, k3};
  c.prod_loss = [x, kt1, kt2, k3, tfix]() {
    using namespace leanet;
    Tensor a = conv2d_transpose(x, kt1, 2);
    Tensor b = conv2d_transpose(x, kt2, 2);  // shared input: gradients sum over paths
    Tensor y = concat_channels(a, b);
    y = conv2d(y, k3, 1, 1);
    return l1_loss(y, Tensor::from_data(y.shape(), tfix));
  };
  c.oracle_loss = [tfix](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(1, 4, 4, 2, p[0]);
    oracle::T A = oracle::conv2d_transpose(X, oracle::from_flat(2, 2, 2, 3, p[1]), 2);
    oracle::T B = oracle::conv2d_transpose(X, oracle::from_flat(2, 2, 2, 2, p[2]), 2);
    oracle::T Y = oracle::conv2d(oracle::concat(A, B), oracle::from_flat(3, 3, 5, 2, p[3]), 1, 1);
    return oracle::l1(Y.v, to_d(tfix));
  };
  return c;
}

// external attention: M = sigmoid(channel_avg(g)); out = (1 + M) * f
inline Case chain_attention_case(uint64_t seed) {
  leanet::Rng rng(seed);
  Tensor x = Tensor::from_data({2, 4, 4, 3}, rand_vec(2 * 4 * 4 * 3, rng));
  x.set_requires_grad(true);
  Tensor kf = Tensor::from_data({3, 3, 3, 8}, rand_vec(3 * 3 * 3 * 8, rng, -0.4f, 0.4f));
  kf.set_requires_grad(true);
  Tensor x2 = Tensor::from_data({2, 4, 4, 2}, rand_vec(2 * 4 * 4 * 2, rng));
  x2.set_requires_grad(true);
  Tensor kg = Tensor::from_data({3, 3, 2, 6}, rand_vec(3 * 3 * 2 * 6, rng, -0.4f, 0.4f));
  kg.set_requires_grad(true);
  Tensor w = Tensor::from_data({8, 1}, rand_vec(8, rng));
  w.set_requires_grad(true);
  const std::vector<float> labels = {0.0f, 1.0f};

  Case c;
  c.name = "chain_attention[seed" + std::to_string(seed) + "]";
  c.h = 1e-6;
  c.params = {x, kf, x2, kg, w};
  c.prod_loss = [x, kf, x2, kg, w, labels]() {
    using namespace leanet;
    Tensor f = conv2d(x, kf, 1, 1);
    Tensor g = conv2d(x2, kg, 1, 1);
    Tensor m = activate(pool(g, PoolKind::ChannelAvg), Act::Sigmoid);
    Tensor fhat = mul(f, add_scalar(m, 1.0f));
    Tensor y = pool(fhat, PoolKind::GlobalAvg);
    y = flatten(y);
    y = fully_connected(y, w);
    y = activate(y, Act::Sigmoid);
    return bce(y, labels);
  };
  c.oracle_loss = [labels](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(2, 4, 4, 3, p[0]);
    oracle::T F = oracle::conv2d(X, oracle::from_flat(3, 3, 3, 8, p[1]), 1, 1);
    oracle::T X2 = oracle::from_flat(2, 4, 4, 2, p[2]);
    oracle::T G = oracle::conv2d(X2, oracle::from_flat(3, 3, 2, 6, p[3]), 1, 1);
    oracle::T M = oracle::sigmoid(oracle::pool_channel_avg(G));
    for (double& d : M.v) d += 1.0;
    oracle::T FH = oracle::ew(F, M, true);
    oracle::T Y = oracle::pool_global_avg(FH);
    std::vector<double> logits = oracle::fc(Y, p[4], 1);
    for (double& t : logits) t = 1.0 / (1.0 + std::exp(-t));
    return oracle::bce(logits, to_d(labels));
  };
  return c;
}

// inverted bottleneck with residual: expand 1x1 -> depthwise -> project 1x1 -> add
inline Case chain_bneck_case(uint64_t seed) {
  leanet::Rng rng(seed);
  Tensor x = Tensor::from_data({1, 8, 8, 4}, rand_vec(8 * 8 * 4, rng, -0.8f, 0.8f));
  x.set_requires_grad(true);
  Tensor ke = Tensor::from_data({1, 1, 4, 8}, rand_vec(4 * 8, rng, -0.5f, 0.5f));
  ke.set_requires_grad(true);
  Tensor kd = Tensor::from_data({3, 3, 8, 1}, rand_vec(3 * 3 * 8, rng, -0.5f, 0.5f));
  kd.set_requires_grad(true);
  Tensor kp = Tensor::from_data({1, 1, 8, 4}, rand_vec(8 * 4, rng, -0.5f, 0.5f));
  kp.set_requires_grad(true);
  Tensor w = Tensor::from_data({4, 1}, rand_vec(4, rng));
  w.set_requires_grad(true);
  const std::vector<float> labels = {1.0f};

  Case c;
  c.name = "chain_bneck[seed" + std::to_string(seed) + "]";
  c.h = 1e-6;
  c.params = {x, ke, kd, kp, w};
  c.prod_loss = [x, ke, kd, kp, w, labels]() {
    using namespace leanet;
    Tensor y = activate(conv2d(x, ke, 1, 0), Act::Relu);
    y = activate(depthwise_conv2d(y, kd, 1, 1), Act::Relu);
    y = conv2d(y, kp, 1, 0);
    y = add(y, x);  // second gradient path into x
    y = pool(y, PoolKind::GlobalAvg);
    y = flatten(y);
    y = fully_connected(y, w);
    y = activate(y, Act::Sigmoid);
    return bce(y, labels);
  };
  c.oracle_loss = [labels](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(1, 8, 8, 4, p[0]);
    oracle::T y = oracle::relu(oracle::conv2d(X, oracle::from_flat(1, 1, 4, 8, p[1]), 1, 0));
    y = oracle::relu(oracle::depthwise_conv2d(y, oracle::from_flat(3, 3, 8, 1, p[2]), 1, 1));
    y = oracle::conv2d(y, oracle::from_flat(1, 1, 8, 4, p[3]), 1, 0);
    y = oracle::ew(y, X, false);
    y = oracle::pool_global_avg(y);
    std::vector<double> logits = oracle::fc(y, p[4], 1);
    for (double& t : logits) t = 1.0 / (1.0 + std::exp(-t));
    return oracle::bce(logits, to_d(labels));
  };
  return c;
}

// strided conv -> leaky relu -> avgpool -> channel_avg -> fc -> sigmoid -> bce
inline Case chain_leaky_case(uint64_t seed) {
  leanet::Rng rng(seed);
  Tensor x = Tensor::from_data({2, 8, 8, 2}, rand_vec(2 * 8 * 8 * 2, rng));
  x.set_requires_grad(true);
  Tensor k = Tensor::from_data({4, 4, 2, 6}, rand_vec(4 * 4 * 2 * 6, rng, -0.4f, 0.4f));
  k.set_requires_grad(true);
  Tensor w = Tensor::from_data({4, 1}, rand_vec(4, rng));
  w.set_requires_grad(true);
  const std::vector<float> labels = {0.0f, 1.0f};

  Case c;
  c.name = "chain_leaky[seed" + std::to_string(seed) + "]";
  c.h = 1e-6;
  c.params = {x, k, w};
  c.prod_loss = [x, k, w, labels]() {
    using namespace leanet;
    Tensor y = conv2d(x, k, 2, 1);               // 2x4x4x6
    y = activate(y, Act::LeakyRelu, 0.2f);
    y = pool(y, PoolKind::Avg, 2);               // 2x2x2x6
    y = pool(y, PoolKind::ChannelAvg);           // 2x2x2x1
    y = flatten(y);                              // 2x4
    y = fully_connected(y, w);
    y = activate(y, Act::Sigmoid);
    return bce(y, labels);
  };
  c.oracle_loss = [labels](const std::vector<std::vector<double>>& p) {
    oracle::T X = oracle::from_flat(2, 8, 8, 2, p[0]);
    oracle::T y = oracle::conv2d(X, oracle::from_flat(4, 4, 2, 6, p[1]), 2, 1);
    y = oracle::leaky_relu(y, 0.2);
    y = oracle::pool_avg(y, 2);
    y = oracle::pool_channel_avg(y);
    std::vector<double> logits = oracle::fc(y, p[2], 1);
    for (double& t : logits) t = 1.0 / (1.0 + std::exp(-t));
    return oracle::bce(logits, to_d(labels));
  };
  return c;
}

inline std::vector<Case> standard_battery() {
  std::vector<Case> cs;
  // conv2d (8)
  cs.push_back(conv_case("conv2d[5x5x2,k3s1p1]", 11, 1, 5, 5, 2, 3, 2, 1, 1, true));
  cs.push_back(conv_case("conv2d[2x8x8x3,k3s1p1]", 12, 2, 8, 8, 3, 3, 8, 1, 1, false));
  cs.push_back(conv_case("conv2d[2x8x8x4,k4s2p1]", 13, 2, 8, 8, 4, 4, 6, 2, 1, false));
  cs.push_back(conv_case("conv2d[1x6x6x5,k1s1p0]", 14, 1, 6, 6, 5, 1, 7, 1, 0, false));
  cs.push_back(conv_case("conv2d[8x8x1,k7s1p3]", 15, 1, 8, 8, 1, 7, 3, 1, 3, true));
  cs.push_back(conv_case("conv2d[1x9x9x2,k5s2p2]", 16, 1, 9, 9, 2, 5, 4, 2, 2, false));
  cs.push_back(conv_case("conv2d[1x6x6x3,k3s1p0]", 17, 1, 6, 6, 3, 3, 4, 1, 0, false));
  cs.push_back(conv_case("conv2d[1x6x4x2,k2s1p0]", 18, 1, 6, 4, 2, 2, 3, 1, 0, false));
  // depthwise (3)
  cs.push_back(depthwise_case("depthwise[1x8x8x4,k3s1p1]", 21, 1, 8, 8, 4, 3, 1, 1));
  cs.push_back(depthwise_case("depthwise[2x8x8x3,k5s2p2]", 22, 2, 8, 8, 3, 5, 2, 2));
  cs.push_back(depthwise_case("depthwise[1x6x6x6,k3s2p1]", 23, 1, 6, 6, 6, 3, 2, 1));
  // conv_transpose (3)
  cs.push_back(convt_case("conv_transpose[4x4x3,k2]", 31, 1, 4, 4, 3, 2, 5, true));
  cs.push_back(convt_case("conv_transpose[2x3x3x4,k2]", 32, 2, 3, 3, 4, 2, 3, false));
  cs.push_back(convt_case("conv_transpose[1x2x2x3,k4]", 33, 1, 2, 2, 3, 4, 2, false));
  // bias (2)
  cs.push_back(bias_case("add_channel_bias[2x4x4x5]", 41, 2, 4, 4, 5));
  cs.push_back(bias_case("add_channel_bias[1x6x6x3]", 42, 1, 6, 6, 3));
  // batchnorm train (4) + eval (2)
  cs.push_back(bn_train_case("batchnorm_train[4x4x4x3]", 51, 4, 4, 4, 3, false));
  cs.push_back(bn_train_case("batchnorm_train[2x6x6x1]", 52, 2, 6, 6, 1, false));
  cs.push_back(bn_train_case("batchnorm_train[8x8x2]", 53, 1, 8, 8, 2, true));
  cs.push_back(bn_train_case("batchnorm_train[3x5x5x5]", 54, 3, 5, 5, 5, false));
  cs.push_back(bn_eval_case("batchnorm_eval[2x4x4x3]", 55, 2, 4, 4, 3));
  cs.push_back(bn_eval_case("batchnorm_eval[3x6x6x2]", 56, 3, 6, 6, 2));
  // pools (10)
  cs.push_back(pool_case("maxpool[6x6x3,w2]", 61, 1, 6, 6, 3, leanet::PoolKind::Max, 2, true));
  cs.push_back(pool_case("maxpool[2x4x4x4,w2]", 62, 2, 4, 4, 4, leanet::PoolKind::Max, 2, false));
  cs.push_back(pool_case("maxpool[1x8x8x2,w4]", 63, 1, 8, 8, 2, leanet::PoolKind::Max, 4, false));
  cs.push_back(pool_case("avgpool[6x6x3,w2]", 64, 1, 6, 6, 3, leanet::PoolKind::Avg, 2, true));
  cs.push_back(pool_case("avgpool[2x4x4x4,w2]", 65, 2, 4, 4, 4, leanet::PoolKind::Avg, 2, false));
  cs.push_back(pool_case("avgpool[1x8x8x2,w4]", 66, 1, 8, 8, 2, leanet::PoolKind::Avg, 4, false));
  cs.push_back(pool_case("global_avg[5x5x4]", 67, 1, 5, 5, 4, leanet::PoolKind::GlobalAvg, 0, true));
  cs.push_back(pool_case("global_avg[3x4x4x2]", 68, 3, 4, 4, 2, leanet::PoolKind::GlobalAvg, 0, false));
  cs.push_back(pool_case("channel_avg[4x4x6]", 69, 1, 4, 4, 6, leanet::PoolKind::ChannelAvg, 0, true));
  cs.push_back(pool_case("channel_avg[2x3x3x5]", 70, 2, 3, 3, 5, leanet::PoolKind::ChannelAvg, 0, false));
  // activations (7)
  cs.push_back(act_case("relu[2x4x4x3]", 71, 2, 4, 4, 3, leanet::Act::Relu, 0.0f));
  cs.push_back(act_case("relu[1x8x8x2]", 72, 1, 8, 8, 2, leanet::Act::Relu, 0.0f));
  cs.push_back(act_case("leaky_relu[2x4x4x3,a0.2]", 73, 2, 4, 4, 3, leanet::Act::LeakyRelu, 0.2f));
  cs.push_back(act_case("leaky_relu[1x6x6x2,a0.01]", 74, 1, 6, 6, 2, leanet::Act::LeakyRelu, 0.01f));
  cs.push_back(act_case("sigmoid[2x4x4x3]", 75, 2, 4, 4, 3, leanet::Act::Sigmoid, 0.0f));
  cs.push_back(act_case("sigmoid[1x6x6x1]", 76, 1, 6, 6, 1, leanet::Act::Sigmoid, 0.0f));
  cs.push_back(act_case("sigmoid[1x2x2x8]", 77, 1, 2, 2, 8, leanet::Act::Sigmoid, 0.0f));
  // elementwise (5) + add_scalar (1)
  cs.push_back(ew_case("ew_add[2x4x4x3]", 81, 2, 4, 4, 3, leanet::EwKind::Add, false));
  cs.push_back(ew_case("ew_add_bcast[2x4x4x3]", 82, 2, 4, 4, 3, leanet::EwKind::Add, true));
  cs.push_back(ew_case("ew_mul[2x4x4x3]", 83, 2, 4, 4, 3, leanet::EwKind::Mul, false));
  cs.push_back(ew_case("ew_mul_bcast[2x4x4x3]", 84, 2, 4, 4, 3, leanet::EwKind::Mul, true));
  cs.push_back(ew_case("ew_mul_bcast[1x6x6x5]", 85, 1, 6, 6, 5, leanet::EwKind::Mul, true));
  cs.push_back(add_scalar_case("add_scalar[4x4x3,c1]", 86, 4, 4, 3, 1.0f));
  // concat / pad / flatten (4)
  cs.push_back(concat_case("concat[2x3x3,2+3]", 91, 2, 3, 3, 2, 3));
  cs.push_back(concat_case("concat[1x4x4,5+1]", 92, 1, 4, 4, 5, 1));
  cs.push_back(pad_case("pad_channels[2x3x3x2,+3]", 93, 2, 3, 3, 2, 3));
  cs.push_back(flatten_case("flatten[2x3x3x4]", 94, 2, 3, 3, 4));
  // fully connected (3)
  cs.push_back(fc_case("fc[4x10->3]", 101, 4, 10, 3, false));
  cs.push_back(fc_case("fc[12->1]", 102, 1, 12, 1, true));
  cs.push_back(fc_case("fc[2x6->4]", 103, 2, 6, 4, false));
  // losses (6)
  cs.push_back(bce_case("bce[n8]", 111, 8));
  cs.push_back(bce_case("bce[n1]", 112, 1));
  cs.push_back(bce_case("bce[n16]", 113, 16));
  cs.push_back(l1_case("l1[4x4x2]", 114, 4, 4, 2));
  cs.push_back(l1_case("l1[3x5x1]", 115, 3, 5, 1));
  cs.push_back(sum_case("sum[3x3x3]", 116, 3, 3, 3));
  // composite chains (6)
  cs.push_back(chain_cnn_case(121));
  cs.push_back(chain_bn_case(122));
  cs.push_back(chain_unetish_case(123));
  cs.push_back(chain_attention_case(124));
  cs.push_back(chain_bneck_case(125));
  cs.push_back(chain_leaky_case(126));
  return cs;
}

}  // namespace gradcheck
