#include "blindvi/adam.hpp"

#include <cmath>

#include "blindvi/errors.hpp"

namespace blindvi {

Adam::Adam(Eigen::Index dim, AdamConfig config)
    : config_(config), m_(RealVector::Zero(dim)), v_(RealVector::Zero(dim)) {}

void Adam::step(RealVector& params, const RealVector& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw ShapeError("adam: parameter, gradient and moment sizes differ");
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  m_ = b1 * m_ + (1.0 - b1) * grad;
  v_ = b2 * v_ + (1.0 - b2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  params.array() -= config_.learning_rate * (m_.array() / c1) /
                    ((v_.array() / c2).sqrt() + config_.epsilon);
}

}  // namespace blindvi
