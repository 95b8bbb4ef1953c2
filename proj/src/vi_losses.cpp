#include "blindvi/vi_losses.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "blindvi/encoder.hpp"
#include "blindvi/errors.hpp"

namespace blindvi {
namespace {

struct ComplexPosterior {
  ComplexMatrix mean_h;  // N x K
  RealMatrix var_h;      // N x K, complex variance (re + im)
  ComplexVector mean_x;  // K
  RealVector var_x;      // K, complex variance
};

void check_dims(const GaussianPosterior& post_h, const GaussianPosterior& post_x,
                const ComplexVector& y) {
  const Eigen::Index n = y.size();
  const Eigen::Index k = post_x.dim() / 2;
  if (n == 0 || post_h.dim() != 2 * n * k) {
    throw ShapeError("loss3: channel posterior has dim " + std::to_string(post_h.dim()) +
                     ", expected 2 * " + std::to_string(n) + " * " + std::to_string(k));
  }
}

// KL(N(m, v) || N(0, p)) summed over entries, recorded on the tape.
ad::Var kl_to_isotropic(const ad::Var& mean, const ad::Var& var, double prior_var) {
  const double n = static_cast<double>(mean.value().size());
  const ad::Var quad = ad::scale(ad::add(ad::sum(var), ad::sum(ad::square(mean))), 0.5 / prior_var);
  const ad::Var logdet = ad::scale(ad::sum(ad::log(var)), -0.5);
  return ad::add_scalar(ad::add(quad, logdet), 0.5 * n * (std::log(prior_var) - 1.0));
}

// Maps the 2NK stacked channel rows onto per-user column sums of |h|^2.
RealMatrix column_energy_map(Eigen::Index n, Eigen::Index k) {
  RealMatrix a = RealMatrix::Zero(k, 2 * n * k);
  for (Eigen::Index r = 0; r < 2 * n * k; ++r) a((r % (n * k)) / n, r) = 1.0;
  return a;
}

// [I_K I_K]: per-user complex variance from stacked real variances.
RealMatrix complex_var_map(Eigen::Index k) {
  RealMatrix b(k, 2 * k);
  b << RealMatrix::Identity(k, k), RealMatrix::Identity(k, k);
  return b;
}

}  // namespace

double likelihood_weight(NoiseWeighting mode, double noise_var) {
  if (mode == NoiseWeighting::Unit) return 1.0;
  if (!(noise_var > 0.0)) throw DomainError("exact likelihood weighting needs noise variance > 0");
  return 1.0 / noise_var;
}

double likelihood_normalizer(Eigen::Index antennas, double noise_var) {
  return static_cast<double>(antennas) * std::log(std::numbers::pi * noise_var);
}

double loss1(const GaussianPosterior& post_x, double power) {
  if (!(power > 0.0)) throw DomainError("loss1: power must be > 0");
  return gaussian_kl_diag(post_x, power);
}

double loss2(const GaussianPosterior& post_h, double prior_var) {
  return gaussian_kl_diag(post_h, prior_var);
}

RealVector reparam_sample(const RealVector& mean, const RealVector& var, const RealVector& noise) {
  if (mean.size() != var.size() || mean.size() != noise.size()) {
    throw ShapeError("reparam_sample: mean, variance and noise sizes differ");
  }
  if ((var.array() < 0.0).any()) throw DomainError("reparam_sample: negative variance");
  return mean.array() + var.array().sqrt() * noise.array();
}

StackedRealVector reparam_sample(const GaussianPosterior& post, Rng& rng) {
  const StackedRealVector h = gaussian_sample(post.dim(), rng);
  return StackedRealVector(reparam_sample(post.mean().values(), post.var(), h.values()));
}

double loss3_mc(const GaussianPosterior& post_h, const GaussianPosterior& post_x,
                const ComplexVector& y, double weight, const RealMatrix& base_noise) {
  check_dims(post_h, post_x, y);
  const Eigen::Index n = y.size();
  const Eigen::Index k = post_x.dim() / 2;
  if (base_noise.cols() < 1) throw DomainError("loss3_mc: need at least one sample");
  if (base_noise.rows() != post_h.dim()) throw ShapeError("loss3_mc: base noise rows != 2NK");

  const ComplexVector mx = post_x.mean().to_complex();
  const RealVector sx = post_x.var().head(k) + post_x.var().tail(k);
  double acc = 0.0;
  for (Eigen::Index l = 0; l < base_noise.cols(); ++l) {
    const StackedRealVector h(
        reparam_sample(post_h.mean().values(), post_h.var(), base_noise.col(l)));
    const ComplexMatrix hl = h.to_matrix(n, k);
    const double trace = (hl.cwiseAbs2() * sx).sum();
    acc += trace + (hl * mx - y).squaredNorm();
  }
  return weight * acc / static_cast<double>(base_noise.cols());
}

double loss3_mc(const GaussianPosterior& post_h, const GaussianPosterior& post_x,
                const ComplexVector& y, double noise_var, int samples, Rng& rng,
                NoiseWeighting mode) {
  if (samples < 1) throw DomainError("loss3_mc: sample count must be >= 1");
  check_dims(post_h, post_x, y);
  const RealMatrix noise = gaussian_matrix(post_h.dim(), samples, rng);
  return loss3_mc(post_h, post_x, y, likelihood_weight(mode, noise_var), noise);
}

double loss3_expected(const GaussianPosterior& post_h, const GaussianPosterior& post_x,
                      const ComplexVector& y, double weight) {
  check_dims(post_h, post_x, y);
  const Eigen::Index n = y.size();
  const Eigen::Index k = post_x.dim() / 2;
  const Eigen::Index nk = n * k;
  const ComplexMatrix mh = post_h.mean().to_matrix(n, k);
  const RealMatrix vh = (post_h.var().head(nk) + post_h.var().tail(nk)).reshaped(n, k);
  const ComplexVector mx = post_x.mean().to_complex();
  const RealVector sx = post_x.var().head(k) + post_x.var().tail(k);
  // E|H m - y|^2 = |m_H m - y|^2 + sum_nk v_nk |m_k|^2, E tr = sum_k s_k (|m_H,k|^2 + sum_n v_nk).
  const double fit = (mh * mx - y).squaredNorm() + (vh * mx.cwiseAbs2()).sum();
  const double trace = ((mh.cwiseAbs2() + vh).colwise().sum() * sx)(0, 0);
  return weight * (fit + trace);
}

Eigen::Index base_noise_cols(const ObjectiveSpec& spec, Eigen::Index slots, int samples) {
  return spec.fusion == ObjectiveSpec::Fusion::Block ? samples : slots * samples;
}

ObjectiveVars record_objective(const ad::Var& packed, const EncoderNet& enc_x,
                               const EncoderNet& enc_h, const RealMatrix& ys,
                               const RealMatrix& mask, const ObjectiveSpec& spec,
                               const RealMatrix& base_noise) {
  ad::Tape& tape = *packed.tape();
  const Eigen::Index n = spec.antennas;
  const Eigen::Index k = spec.users;
  const Eigen::Index slots = ys.cols();
  if (ys.rows() != 2 * n || mask.rows() != k || mask.cols() != slots) {
    throw ShapeError("objective: received block or mask does not match N, K");
  }
  if (enc_x.out_dim() != 2 * k || enc_h.out_dim() != 2 * n * k) {
    throw ShapeError("objective: encoder output sizes do not match the system dimensions");
  }
  if (packed.rows() != enc_x.parameter_count() + enc_h.parameter_count()) {
    throw ShapeError("objective: packed parameter vector has the wrong length");
  }
  const bool block = spec.fusion == ObjectiveSpec::Fusion::Block;
  const Eigen::Index samples = block ? base_noise.cols() : base_noise.cols() / slots;
  if (samples < 1 || base_noise.rows() != 2 * n * k ||
      base_noise.cols() != base_noise_cols(spec, slots, static_cast<int>(samples))) {
    throw ShapeError("objective: base noise shape does not match the fusion mode");
  }

  const ad::Var y = tape.constant(ys);
  const EncoderNet::Vars qx = enc_x.forward(packed, 0, y);
  const EncoderNet::Vars qh = enc_h.forward(packed, enc_x.parameter_count(), y);

  ObjectiveVars out;
  out.loss1 = kl_to_isotropic(qx.mean, qx.var, spec.power);

  RealMatrix mask2(2 * k, slots);
  mask2 << mask, mask;
  const ad::Var m2 = tape.constant(mask2);
  const ad::Var mx = ad::hadamard(qx.mean, m2);
  const ad::Var sx = ad::lmul(complex_var_map(k), ad::hadamard(qx.var, m2));  // K x T

  const ad::Var x_rep = ad::tile_cols(mx, samples);
  RealMatrix y_rep(2 * n, slots * samples);
  for (Eigen::Index l = 0; l < samples; ++l) y_rep.middleCols(l * slots, slots) = ys;
  const RealMatrix energy_map = column_energy_map(n, k);

  ad::Var h_samples;
  ad::Var trace;
  if (block) {
    RealMatrix weights = mask;
    for (Eigen::Index u = 0; u < k; ++u) {
      const double count = mask.row(u).sum();
      if (count > 0.0) weights.row(u) /= count;
    }
    std::vector<Eigen::Index> group(static_cast<std::size_t>(2 * n * k));
    for (Eigen::Index r = 0; r < 2 * n * k; ++r) group[r] = (r % (n * k)) / n;
    const ad::Var mh = ad::weighted_row_sum(qh.mean, group, weights);
    const ad::Var vh = ad::weighted_row_sum(qh.var, group, weights);
    out.loss2 = kl_to_isotropic(mh, vh, spec.channel_prior_var);
    h_samples = ad::reparam(ad::tile_cols(mh, samples), ad::tile_cols(vh, samples), base_noise);
    // sum_l sum_t sum_k |h_lk|^2 s_tk
    const ad::Var energy = ad::rmul(ad::lmul(energy_map, ad::square(h_samples)),
                                    RealMatrix::Ones(samples, 1));
    const ad::Var svar = ad::rmul(sx, RealMatrix::Ones(slots, 1));
    trace = ad::sum(ad::hadamard(energy, svar));
  } else {
    out.loss2 = kl_to_isotropic(qh.mean, qh.var, spec.channel_prior_var);
    h_samples =
        ad::reparam(ad::tile_cols(qh.mean, samples), ad::tile_cols(qh.var, samples), base_noise);
    const ad::Var energy = ad::lmul(energy_map, ad::square(h_samples));  // K x TL
    trace = ad::sum(ad::hadamard(energy, ad::tile_cols(sx, samples)));
  }
  const ad::Var residual = ad::sub(tape.constant(y_rep), ad::cmatvec(h_samples, x_rep, n, k));
  const ad::Var fit = ad::sum(ad::square(residual));
  out.loss3 = ad::scale(ad::add(fit, trace), spec.weight / static_cast<double>(samples));
  out.total = ad::add(ad::add(out.loss1, out.loss2), out.loss3);
  return out;
}

}  // namespace blindvi
