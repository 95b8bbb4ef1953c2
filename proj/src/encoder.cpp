#include "blindvi/encoder.hpp"

#include <cmath>
#include <string>

#include "blindvi/errors.hpp"

namespace blindvi {

EncoderNet::EncoderNet(Eigen::Index input_dim, Eigen::Index out_dim, Eigen::Index hidden,
                       double amplitude)
    : input_dim_(input_dim), hidden_(hidden), out_dim_(out_dim), amplitude_(amplitude) {
  if (input_dim < 1 || out_dim < 1 || hidden < 1) {
    throw DomainError("encoder dimensions must be >= 1");
  }
  if (!(amplitude > 0.0)) throw DomainError("encoder mean amplitude must be > 0");
  params_ = RealVector::Zero(parameter_count());
}

EncoderNet EncoderNet::random(Eigen::Index input_dim, Eigen::Index out_dim, Eigen::Index hidden,
                              double amplitude, Rng& rng) {
  EncoderNet net(input_dim, out_dim, hidden, amplitude);
  RealVector& p = net.params_;
  const Eigen::Index first = (input_dim + 1) * hidden;
  const double a1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double a2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double a = i < first ? a1 : a2;
    p[i] = a * (2.0 * rng.uniform() - 1.0);
  }
  return net;
}

Eigen::Index EncoderNet::parameter_count() const noexcept {
  return (input_dim_ + 1) * hidden_ + (hidden_ + 1) * 2 * out_dim_;
}

void EncoderNet::set_params(RealVector params) {
  if (params.size() != parameter_count()) {
    throw ShapeError("encoder expects " + std::to_string(parameter_count()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  params_ = std::move(params);
}

EncoderNet::Batch EncoderNet::forward_batch(const RealMatrix& ys) const {
  if (ys.rows() != input_dim_) {
    throw ShapeError("encoder input must have " + std::to_string(input_dim_) + " rows, got " +
                     std::to_string(ys.rows()));
  }
  const double* p = params_.data();
  const Eigen::Map<const RealMatrix> w1(p, hidden_, input_dim_);
  p += hidden_ * input_dim_;
  const Eigen::Map<const RealVector> b1(p, hidden_);
  p += hidden_;
  const Eigen::Map<const RealMatrix> w2(p, 2 * out_dim_, hidden_);
  p += 2 * out_dim_ * hidden_;
  const Eigen::Map<const RealVector> b2(p, 2 * out_dim_);

  RealMatrix hidden = w1 * ys;
  hidden.colwise() += b1;
  hidden = hidden.array().tanh();
  RealMatrix out = w2 * hidden;
  out.colwise() += b2;

  Batch b;
  b.mean = amplitude_ * out.topRows(out_dim_).array().tanh();
  b.var = out.bottomRows(out_dim_).cwiseMax(kLogVarMin).cwiseMin(kLogVarMax).array().exp();
  if (!b.mean.allFinite() || !b.var.allFinite()) {
    throw NumericError("encoder produced a non-finite posterior");
  }
  return b;
}

GaussianPosterior EncoderNet::forward(const StackedRealVector& y) const {
  Batch b = forward_batch(y.values());
  return GaussianPosterior(StackedRealVector(b.mean.col(0)), b.var.col(0));
}

EncoderNet::Vars EncoderNet::forward(const ad::Var& packed, Eigen::Index offset,
                                     const ad::Var& ys) const {
  Eigen::Index at = offset;
  const ad::Var w1 = ad::segment(packed, at, hidden_, input_dim_);
  at += hidden_ * input_dim_;
  const ad::Var b1 = ad::segment(packed, at, hidden_, 1);
  at += hidden_;
  const ad::Var w2 = ad::segment(packed, at, 2 * out_dim_, hidden_);
  at += 2 * out_dim_ * hidden_;
  const ad::Var b2 = ad::segment(packed, at, 2 * out_dim_, 1);

  const ad::Var hidden = ad::tanh(ad::affine(w1, ys, b1));
  const ad::Var out = ad::affine(w2, hidden, b2);
  const ad::Var mean = ad::scale(ad::tanh(ad::rows(out, 0, out_dim_)), amplitude_);
  const ad::Var var = ad::exp(ad::clamp(ad::rows(out, out_dim_, out_dim_), kLogVarMin, kLogVarMax));
  return {mean, var};
}

}  // namespace blindvi
