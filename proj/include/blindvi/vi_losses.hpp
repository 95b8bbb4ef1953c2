#pragma once

#include "blindvi/autodiff.hpp"
#include "blindvi/gaussian.hpp"
#include "blindvi/linalg.hpp"
#include "blindvi/rng.hpp"

namespace blindvi {

/// Per-real-dimension prior variance of the channel entries, CN(0, 1).
inline constexpr double kChannelPriorVar = 0.5;

/// How the reconstruction term is scaled.
///
/// Exact: 1 / sigma^2 on the complex squared residual, which is the CN(0, sigma^2)
/// log-likelihood without its additive normalizer (1 / (2 s) with s = sigma^2 / 2
/// the per-real-dimension noise variance). Unit: no scaling.
enum class NoiseWeighting { Exact, Unit };

double likelihood_weight(NoiseWeighting mode, double noise_var);
/// N * log(pi * sigma^2): the part of -log CN(y; Hx, sigma^2 I) that the
/// training losses drop.
double likelihood_normalizer(Eigen::Index antennas, double noise_var);

/// KL of the symbol posterior (2K dims) to the relaxed prior CN(0, 2 rho^2 I),
/// i.e. variance rho^2 per real dimension.
double loss1(const GaussianPosterior& post_x, double power);

/// KL of the channel posterior (2NK dims) to i.i.d. entries of per-real-dim
/// variance `prior_var`.
double loss2(const GaussianPosterior& post_h, double prior_var = kChannelPriorVar);

/// mean + sqrt(var) .* noise. A zero variance returns the mean exactly.
RealVector reparam_sample(const RealVector& mean, const RealVector& var, const RealVector& noise);
StackedRealVector reparam_sample(const GaussianPosterior& post, Rng& rng);

/// Monte Carlo reconstruction term for one slot with frozen base noise.
///
/// `base_noise` is 2NK x L; sample l is H_l = m_H + sqrt(S_H) .* noise[:, l].
/// Returns weight / L * sum_l [ tr(H_l S_x H_l^H) + |H_l m_x - y|^2 ].
double loss3_mc(const GaussianPosterior& post_h, const GaussianPosterior& post_x,
                const ComplexVector& y, double weight, const RealMatrix& base_noise);
/// Draws L samples from `rng`. Throws DomainError if samples < 1.
double loss3_mc(const GaussianPosterior& post_h, const GaussianPosterior& post_x,
                const ComplexVector& y, double noise_var, int samples, Rng& rng,
                NoiseWeighting mode = NoiseWeighting::Exact);

/// Expectation of the reconstruction term under the channel posterior, in closed form.
double loss3_expected(const GaussianPosterior& post_h, const GaussianPosterior& post_x,
                      const ComplexVector& y, double weight);

struct LossTerms {
  double loss1 = 0.0;
  double loss2 = 0.0;
  double loss3 = 0.0;
  double total = 0.0;
};

/// Settings shared by every objective evaluation of one block.
struct ObjectiveSpec {
  Eigen::Index antennas = 0;
  Eigen::Index users = 0;
  double power = 1.0;
  double weight = 1.0;
  double channel_prior_var = kChannelPriorVar;
  /// Block: one channel posterior per block, the per-slot encoder outputs
  /// averaged over the slots where each user is active. PerSlot: every slot
  /// keeps its own channel posterior.
  enum class Fusion { Block, PerSlot } fusion = Fusion::Block;
};

struct ObjectiveVars {
  ad::Var loss1;
  ad::Var loss2;
  ad::Var loss3;
  ad::Var total;
};

class EncoderNet;

/// Records loss1 + loss2 + loss3 over a whole block.
///
/// `packed` holds the symbol encoder's parameters followed by the channel
/// encoder's. `ys` is 2N x T, `mask` K x T with 1 where a user transmits;
/// silent users contribute nothing to the reconstruction. `base_noise` is
/// 2NK x L for Block fusion and 2NK x (T * L) for PerSlot, where column
/// l * T + t drives sample l of slot t.
ObjectiveVars record_objective(const ad::Var& packed, const EncoderNet& enc_x,
                               const EncoderNet& enc_h, const RealMatrix& ys,
                               const RealMatrix& mask, const ObjectiveSpec& spec,
                               const RealMatrix& base_noise);

/// Column count of the base noise `record_objective` expects.
Eigen::Index base_noise_cols(const ObjectiveSpec& spec, Eigen::Index slots, int samples);

}  // namespace blindvi
