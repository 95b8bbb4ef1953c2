#pragma once

#include "blindvi/linalg.hpp"

namespace blindvi {

struct AdamConfig {
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index dim, AdamConfig config);

  void step(RealVector& params, const RealVector& grad);

  const AdamConfig& config() const noexcept { return config_; }
  void set_learning_rate(double lr) noexcept { config_.learning_rate = lr; }
  const RealVector& first_moment() const noexcept { return m_; }
  const RealVector& second_moment() const noexcept { return v_; }
  long steps() const noexcept { return t_; }

 private:
  AdamConfig config_;
  RealVector m_;
  RealVector v_;
  long t_ = 0;
};

}  // namespace blindvi
