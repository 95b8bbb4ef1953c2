#pragma once

#include <iosfwd>
#include <vector>

#include "blindvi/constellation.hpp"
#include "blindvi/linalg.hpp"
#include "blindvi/rng.hpp"

namespace blindvi {

using IndexMatrix = Eigen::MatrixXi;

/// Per-receive-antenna SNR convention: snr = power / noise_var.
double noise_var_for_snr(double snr_db, double power = 1.0);
double snr_db_for(double power, double noise_var);

/// Rayleigh block-fading channel: i.i.d. CN(0, 1) entries, fixed for one frame.
struct ChannelRealization {
  ComplexMatrix h;
  double noise_var = 0.0;
  double power = 1.0;

  double snr_db() const { return snr_db_for(power, noise_var); }
};

ChannelRealization draw_channel(int antennas, int users, Rng& rng, double noise_var = 0.0,
                                double power = 1.0);

/// Circularly symmetric CN(0, noise_var) entries (noise_var / 2 per real part).
ComplexMatrix complex_noise(Eigen::Index rows, Eigen::Index cols, double noise_var, Rng& rng);

enum class Phase { Estimation, Detection };

/// Which users transmit in each slot.
struct Schedule {
  Phase phase = Phase::Detection;
  int users = 0;
  std::vector<std::vector<bool>> slots;

  int length() const noexcept { return static_cast<int>(slots.size()); }
  bool active(int user, int slot) const { return slots.at(slot).at(user); }
  /// K x T 0/1 matrix.
  RealMatrix mask() const;
};

/// One user per slot, round-robin, `rounds` slots per user (T = users * rounds).
Schedule estimation_schedule(int users, int rounds);
/// All users in every slot.
Schedule detection_schedule(int users, int slots);

/// Uniform symbol indices for active positions, -1 elsewhere.
IndexMatrix random_symbols(const Schedule& schedule, const Constellation& c, Rng& rng);

struct Frame {
  ComplexMatrix h;
  Schedule schedule;
  Constellation constellation;
  double noise_var = 0.0;
  IndexMatrix symbols;  ///< K x T truth, -1 where the user is silent.
  ComplexMatrix tx;     ///< K x T, exact zeros where silent.
  ComplexMatrix rx;     ///< N x T.

  int antennas() const noexcept { return static_cast<int>(h.rows()); }
  int users() const noexcept { return static_cast<int>(h.cols()); }
  int slots() const noexcept { return static_cast<int>(rx.cols()); }
};

/// rx_t = H x_t + n_t for every slot of the schedule.
Frame transmit(const ComplexMatrix& h, const Schedule& schedule, const IndexMatrix& symbols,
               const Constellation& c, double noise_var, Rng& rng);

/// Debug dump of the received block: `slot,antenna,re,im` rows, round-trip exact.
void write_frame_csv(std::ostream& out, const Frame& frame);
/// Reads the format written by write_frame_csv back into an N x T matrix.
ComplexMatrix read_frame_csv(std::istream& in);

}  // namespace blindvi
