#include "blindvi/vi_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>

#include "blindvi/errors.hpp"

namespace blindvi {
namespace {

double window_mean(const std::vector<double>& trace, std::size_t end, std::size_t width) {
  return std::accumulate(trace.begin() + static_cast<long>(end - width),
                         trace.begin() + static_cast<long>(end), 0.0) /
         static_cast<double>(width);
}

// Only iterations after `stage_start` count toward the windows.
bool has_converged(const std::vector<double>& trace, std::size_t stage_start, int window,
                   double tolerance) {
  const auto w = static_cast<std::size_t>(window);
  if (w == 0 || trace.size() - stage_start < 2 * w) return false;
  const double recent = window_mean(trace, trace.size(), w);
  const double before = window_mean(trace, trace.size() - w, w);
  return std::abs(recent - before) <= tolerance * std::max(std::abs(recent), 1e-300);
}

}  // namespace

double resolved_amplitude(const VIConfig& config, double power) {
  if (config.amplitude > 0.0) return config.amplitude;
  return 3.0 * std::max(std::sqrt(power), 1.0);
}

double model_noise_var(const VIConfig& config, double true_noise_var) {
  const double v = config.model_noise_var > 0.0 ? config.model_noise_var : true_noise_var;
  return std::max(v, config.noise_floor);
}

VIState VIState::create(int antennas, int users, const VIConfig& config, double power, Rng& rng) {
  const double amp = resolved_amplitude(config, power);
  VIState s;
  s.encoder_x = EncoderNet::random(2 * antennas, 2 * users, config.hidden, amp, rng);
  s.encoder_h = EncoderNet::random(2 * antennas, 2 * antennas * users, config.hidden, amp, rng);
  s.adam = Adam(s.encoder_x.parameter_count() + s.encoder_h.parameter_count(),
                AdamConfig{config.learning_rate});
  s.mc_samples = config.mc_samples;
  s.learning_rate = config.learning_rate;
  return s;
}

RealVector VIState::packed() const {
  RealVector p(encoder_x.parameter_count() + encoder_h.parameter_count());
  p << encoder_x.params(), encoder_h.params();
  return p;
}

void VIState::unpack(const RealVector& packed) {
  const Eigen::Index nx = encoder_x.parameter_count();
  if (packed.size() != nx + encoder_h.parameter_count()) {
    throw ShapeError("VIState::unpack: wrong parameter count");
  }
  encoder_x.set_params(packed.head(nx));
  encoder_h.set_params(packed.tail(encoder_h.parameter_count()));
}

LossTerms elbo_loss(const VIState& state, const ComplexVector& y, double power, double noise_var,
                    Rng& rng, NoiseWeighting mode, double channel_prior_var) {
  const StackedRealVector ys = StackedRealVector::from_complex(y);
  const GaussianPosterior qx = state.encoder_x.forward(ys);
  const GaussianPosterior qh = state.encoder_h.forward(ys);
  LossTerms t;
  t.loss1 = loss1(qx, power);
  t.loss2 = loss2(qh, channel_prior_var);
  t.loss3 = loss3_mc(qh, qx, y, noise_var, state.mc_samples, rng, mode);
  t.total = t.loss1 + t.loss2 + t.loss3;
  if (!std::isfinite(t.total)) throw NumericError("elbo_loss: non-finite value");
  return t;
}

BlockEstimate fit_block(const Frame& frame, const VIConfig& config, Rng& rng) {
  VIState state = VIState::create(frame.antennas(), frame.users(), config,
                                  frame.constellation.power, rng);
  return fit_block(frame, config, state, rng);
}

BlockEstimate fit_block(const Frame& frame, const VIConfig& config, VIState& state, Rng& rng) {
  const Eigen::Index n = frame.antennas();
  const Eigen::Index k = frame.users();
  const Eigen::Index slots = frame.slots();
  for (int t = 0; t < slots; ++t) {
    int active = 0;
    for (int u = 0; u < k; ++u) active += frame.schedule.active(u, t) ? 1 : 0;
    if (active > 1) {
      throw DomainError("fit_block: slot " + std::to_string(t) + " has " +
                        std::to_string(active) + " active users; expected an estimation frame");
    }
  }
  if (config.mc_samples < 1 || config.report_samples < 1) {
    throw DomainError("fit_block: Monte Carlo sample counts must be >= 1");
  }

  ObjectiveSpec spec;
  spec.antennas = n;
  spec.users = k;
  spec.power = frame.constellation.power;
  spec.weight = likelihood_weight(config.weighting, model_noise_var(config, frame.noise_var));
  spec.channel_prior_var = config.channel_prior_var;
  spec.fusion = config.fusion;

  const RealMatrix ys = stack_columns(frame.rx);
  const RealMatrix mask = frame.schedule.mask();
  const Eigen::Index noise_cols = base_noise_cols(spec, slots, config.mc_samples);

  BlockEstimate est;
  RealVector params = state.packed();
  double lr = config.learning_rate;
  state.adam.set_learning_rate(lr);
  std::size_t stage_start = 0;
  for (int it = 0; it < config.max_iters; ++it) {
    const RealMatrix noise = gaussian_matrix(2 * n * k, noise_cols, rng);
    ad::Tape tape;
    const ad::Var p = tape.variable(params);
    ObjectiveVars obj;
    try {
      obj = record_objective(p, state.encoder_x, state.encoder_h, ys, mask, spec, noise);
      tape.backward(obj.total);
    } catch (const NumericError& e) {
      throw TrainingError(std::string("fit_block: ") + e.what() + " at iteration " +
                              std::to_string(it),
                          est.loss_trace);
    }
    est.loss_trace.push_back(obj.total.scalar());
    if (config.record_terms) {
      est.term_trace.push_back(
          {obj.loss1.scalar(), obj.loss2.scalar(), obj.loss3.scalar(), obj.total.scalar()});
    }
    state.adam.step(params, tape.gradient(p).col(0));
    state.unpack(params);
    est.iterations = it + 1;
    if (has_converged(est.loss_trace, stage_start, config.window, config.tolerance)) {
      if (est.lr_drops >= config.lr_drops) {
        est.converged = true;
        break;
      }
      lr *= config.lr_drop_factor;
      state.adam.set_learning_rate(lr);
      ++est.lr_drops;
      stage_start = est.loss_trace.size();
    }
  }

  {
    const RealMatrix noise =
        gaussian_matrix(2 * n * k, base_noise_cols(spec, slots, config.report_samples), rng);
    ad::Tape tape;
    const ad::Var p = tape.constant(params);
    est.final_loss =
        record_objective(p, state.encoder_x, state.encoder_h, ys, mask, spec, noise).total.scalar();
  }

  const EncoderNet::Batch bx = state.encoder_x.forward_batch(ys);
  const EncoderNet::Batch bh = state.encoder_h.forward_batch(ys);
  est.posteriors.reserve(static_cast<std::size_t>(slots));
  for (Eigen::Index t = 0; t < slots; ++t) {
    est.posteriors.emplace_back(GaussianPosterior(StackedRealVector(bx.mean.col(t)), bx.var.col(t)),
                                GaussianPosterior(StackedRealVector(bh.mean.col(t)), bh.var.col(t)));
  }

  // Column k of the estimate averages the per-slot means over user k's slots.
  est.h_hat = ComplexMatrix::Zero(n, k);
  const ComplexMatrix mh = unstack_columns(bh.mean);  // NK x T
  for (Eigen::Index u = 0; u < k; ++u) {
    const double count = mask.row(u).sum();
    if (count == 0.0) continue;
    ComplexVector acc = ComplexVector::Zero(n);
    for (Eigen::Index t = 0; t < slots; ++t) {
      if (mask(u, t) > 0.0) acc += mh.col(t).segment(u * n, n);
    }
    est.h_hat.col(u) = acc / count;
  }

  const ComplexMatrix mx = unstack_columns(bx.mean);  // K x T
  est.x_hat = IndexMatrix::Constant(k, slots, -1);
  for (Eigen::Index t = 0; t < slots; ++t) {
    for (Eigen::Index u = 0; u < k; ++u) {
      if (mask(u, t) > 0.0) est.x_hat(u, t) = demodulate_hard(mx(u, t), frame.constellation);
    }
  }
  return est;
}

void write_trace_csv(std::ostream& out, const BlockEstimate& estimate) {
  out << "iteration,loss1,loss2,loss3,total\n";
  char buf[160];
  for (std::size_t i = 0; i < estimate.term_trace.size(); ++i) {
    const LossTerms& t = estimate.term_trace[i];
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g\n", i, t.loss1, t.loss2, t.loss3,
                  t.total);
    out << buf;
  }
}

}  // namespace blindvi
