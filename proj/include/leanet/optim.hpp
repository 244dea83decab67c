#pragma once

#include <cstdint>
#include <vector>

#include "leanet/tensor.hpp"

namespace leanet {

struct AdamConfig {
  float lr = 0.001f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Adam with positional per-parameter state: moment slot i always pairs with
// the i-th tensor passed to step(), so callers must keep parameter order
// stable across steps. State can be exported/imported for checkpointing.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  int64_t step_count() const { return t_; }

  // Applies one update using each parameter's current gradient.
  void step(const std::vector<Tensor>& params);

  // Drops all moments and resets the step counter.
  void reset();

  const std::vector<std::vector<float>>& moment1() const { return m_; }
  const std::vector<std::vector<float>>& moment2() const { return v_; }
  void restore(int64_t t, std::vector<std::vector<float>> m, std::vector<std::vector<float>> v);

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

}  // namespace leanet
