#pragma once

#include "gavatar/types.hpp"

#include <cmath>
#include <vector>

namespace gavatar {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-15;
};

/// Adam moments for one flat parameter group.
template <typename S> class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  size_t size() const { return m_.size(); }
  long steps() const { return t_; }

  void step(S* params, const S* grad, size_t n, double lr, const AdamConfig& cfg) {
    require(n == m_.size(), ErrorKind::Shape, "Adam state size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg.beta1, double(t_));
    const double c2 = 1.0 - std::pow(cfg.beta2, double(t_));
    for (size_t i = 0; i < n; ++i) {
      const double g = static_cast<double>(grad[i]);
      m_[i] = cfg.beta1 * m_[i] + (1.0 - cfg.beta1) * g;
      v_[i] = cfg.beta2 * v_[i] + (1.0 - cfg.beta2) * g * g;
      const double mh = m_[i] / c1, vh = v_[i] / c2;
      params[i] -= S(lr * mh / (std::sqrt(vh) + cfg.eps));
    }
  }

 private:
  std::vector<double> m_, v_;
  long t_ = 0;
};

}  // namespace gavatar
