#pragma once

#include "blindvi/linalg.hpp"
#include "blindvi/rng.hpp"

namespace blindvi {

/// Diagonal-covariance Gaussian over a stacked-real vector.
///
/// A complex CN(mu, c I) maps to per-real-dimension variance c / 2.
class GaussianPosterior {
 public:
  /// Throws ShapeError on length mismatch, DomainError on a variance <= 0.
  GaussianPosterior(StackedRealVector mean, RealVector var);

  const StackedRealVector& mean() const noexcept { return mean_; }
  const RealVector& var() const noexcept { return var_; }
  Eigen::Index dim() const noexcept { return mean_.dim(); }

 private:
  StackedRealVector mean_;
  RealVector var_;
};

/// i.i.d. N(0, 1) per real dimension. `dim` must be even and positive.
StackedRealVector gaussian_sample(Eigen::Index dim, Rng& rng);

/// Fill an arbitrary real matrix with i.i.d. N(0, 1) draws (column-major order).
RealMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Exact KL(post || N(0, diag(prior_var))).
double gaussian_kl_diag(const GaussianPosterior& post, const RealVector& prior_var);
/// Same with an isotropic prior variance.
double gaussian_kl_diag(const GaussianPosterior& post, double prior_var);

}  // namespace blindvi
