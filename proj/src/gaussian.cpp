#include "blindvi/gaussian.hpp"

#include <cmath>
#include <string>

#include "blindvi/errors.hpp"

namespace blindvi {

GaussianPosterior::GaussianPosterior(StackedRealVector mean, RealVector var)
    : mean_(std::move(mean)), var_(std::move(var)) {
  if (mean_.dim() != var_.size()) {
    throw ShapeError("posterior mean has dim " + std::to_string(mean_.dim()) +
                     " but variance has dim " + std::to_string(var_.size()));
  }
  for (Eigen::Index i = 0; i < var_.size(); ++i) {
    if (!(var_[i] > 0.0) || !std::isfinite(var_[i])) {
      throw DomainError("posterior variance must be finite and > 0 (index " + std::to_string(i) +
                        ")");
    }
  }
}

StackedRealVector gaussian_sample(Eigen::Index dim, Rng& rng) {
  if (dim <= 0 || dim % 2 != 0) {
    throw DomainError("gaussian_sample: dim must be even and positive, got " +
                      std::to_string(dim));
  }
  RealVector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.normal();
  return StackedRealVector(std::move(v));
}

RealMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  RealMatrix m(rows, cols);
  double* data = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) data[i] = rng.normal();
  return m;
}

double gaussian_kl_diag(const GaussianPosterior& post, const RealVector& prior_var) {
  if (prior_var.size() != post.dim()) {
    throw ShapeError("gaussian_kl_diag: prior dim " + std::to_string(prior_var.size()) +
                     " vs posterior dim " + std::to_string(post.dim()));
  }
  const RealVector& m = post.mean().values();
  const RealVector& s = post.var();
  double kl = 0.0;
  for (Eigen::Index d = 0; d < s.size(); ++d) {
    const double p = prior_var[d];
    if (!(p > 0.0)) throw DomainError("gaussian_kl_diag: prior variance must be > 0");
    const double ratio = s[d] / p;
    kl += 0.5 * (ratio + m[d] * m[d] / p - 1.0 - std::log(ratio));
  }
  return kl;
}

double gaussian_kl_diag(const GaussianPosterior& post, double prior_var) {
  return gaussian_kl_diag(post, RealVector::Constant(post.dim(), prior_var));
}

}  // namespace blindvi
