#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "blindvi/adam.hpp"
#include "blindvi/channel.hpp"
#include "blindvi/encoder.hpp"
#include "blindvi/vi_losses.hpp"

namespace blindvi {

using Fusion = ObjectiveSpec::Fusion;

struct VIConfig {
  double learning_rate = 0.05;
  int mc_samples = 10;       ///< L during training
  int report_samples = 100;  ///< L for the reported final loss
  int max_iters = 2000;
  double tolerance = 1e-4;  ///< relative change between consecutive window means
  int window = 20;
  int lr_drops = 2;           ///< on convergence, shrink the step and continue this many times
  double lr_drop_factor = 0.1;
  int hidden = 16;
  double amplitude = 0.0;  ///< mean-head bound; 0 selects 3 * max(rho, 1)
  NoiseWeighting weighting = NoiseWeighting::Exact;
  double model_noise_var = 0.0;  ///< 0 uses the frame's true noise variance
  double noise_floor = 1e-3;     ///< lower bound on the model noise variance
  Fusion fusion = Fusion::Block;
  double channel_prior_var = kChannelPriorVar;
  bool record_terms = false;  ///< keep loss1/2/3 per iteration in the estimate
};

/// Encoder pair plus optimizer state for one coherence block.
struct VIState {
  EncoderNet encoder_x;  ///< y_t -> q(x_t), out_dim 2K
  EncoderNet encoder_h;  ///< y_t -> q(H), out_dim 2NK
  Adam adam;
  int mc_samples = 10;
  double learning_rate = 0.05;

  static VIState create(int antennas, int users, const VIConfig& config, double power, Rng& rng);

  RealVector packed() const;
  void unpack(const RealVector& packed);
};

double resolved_amplitude(const VIConfig& config, double power);
double model_noise_var(const VIConfig& config, double true_noise_var);

/// Per-slot ELBO terms with both posteriors taken from the encoders at y.
LossTerms elbo_loss(const VIState& state, const ComplexVector& y, double power, double noise_var,
                    Rng& rng, NoiseWeighting mode = NoiseWeighting::Exact,
                    double channel_prior_var = kChannelPriorVar);

struct BlockEstimate {
  ComplexMatrix h_hat;  ///< N x K
  IndexMatrix x_hat;    ///< K x T nearest-point decisions, -1 where silent
  std::vector<std::pair<GaussianPosterior, GaussianPosterior>> posteriors;  ///< (q(x_t), q(H|y_t))
  std::vector<double> loss_trace;
  std::vector<LossTerms> term_trace;  ///< filled when record_terms is set
  double final_loss = 0.0;            ///< objective at the end with report_samples
  int iterations = 0;
  int lr_drops = 0;  ///< step reductions applied
  bool converged = false;
};

/// Trains a fresh encoder pair on an estimation-phase frame.
///
/// Throws DomainError for frames with a slot where more than one user
/// transmits, TrainingError when a loss becomes non-finite.
BlockEstimate fit_block(const Frame& frame, const VIConfig& config, Rng& rng);

/// Same, but starting from (and updating) an existing state.
BlockEstimate fit_block(const Frame& frame, const VIConfig& config, VIState& state, Rng& rng);

/// `iteration,loss1,loss2,loss3,total`; requires record_terms.
void write_trace_csv(std::ostream& out, const BlockEstimate& estimate);

}  // namespace blindvi
