#include "leanet/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace leanet {

void Adam::step(const std::vector<Tensor>& params) {
  if (!m_.empty() && m_.size() != params.size())
    throw std::runtime_error("Adam::step: parameter count changed from " +
                             std::to_string(m_.size()) + " to " + std::to_string(params.size()));
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      const size_t n = params[i].data().size();
      m_[i].assign(n, 0.0f);
      v_[i].assign(n, 0.0f);
    }
  }
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double corr1 = 1.0 - std::pow(b1, double(t_));
  const double corr2 = 1.0 - std::pow(b2, double(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    if (!p.has_grad())
      throw std::runtime_error("Adam::step: parameter " + std::to_string(i) +
                               " has no gradient (backward not run?)");
    std::vector<float>& value = p.data();
    const std::vector<float>& g = p.grad();
    std::vector<float>& m = m_[i];
    std::vector<float>& v = v_[i];
    if (m.size() != value.size())
      throw std::runtime_error("Adam::step: parameter " + std::to_string(i) + " size changed");
    for (size_t j = 0; j < value.size(); ++j) {
      const double gj = g[j];
      const double mj = b1 * m[j] + (1.0 - b1) * gj;
      const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
      m[j] = float(mj);
      v[j] = float(vj);
      const double mhat = mj / corr1;
      const double vhat = vj / corr2;
      value[j] = float(value[j] - double(cfg_.lr) * mhat / (std::sqrt(vhat) + double(cfg_.eps)));
    }
  }
}

void Adam::reset() {
  t_ = 0;
  m_.clear();
  v_.clear();
}

void Adam::restore(int64_t t, std::vector<std::vector<float>> m,
                   std::vector<std::vector<float>> v) {
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace leanet
