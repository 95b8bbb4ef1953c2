#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "blindvi/channel.hpp"
#include "blindvi/vi_estimator.hpp"

namespace blindvi {

enum class Estimator { BlindVi, AidedLs, AidedMmse, PerfectCsi };

/// "Blind-VI", "Aided-LS", "Aided-MMSE", "Perfect-CSI" (matching is case-insensitive).
std::string to_string(Estimator e);
Estimator parse_estimator(const std::string& name);
/// Comma-separated list; duplicates are rejected.
std::vector<Estimator> parse_estimator_list(const std::string& list);

struct ExperimentConfig {
  int antennas = 4;
  int users = 4;
  Modulation modulation = Modulation::Qpsk;
  double power = 1.0;
  std::vector<double> snr_grid_db{0.0, 5.0, 10.0, 15.0, 20.0, 25.0};
  int blocks = 100;
  int est_rounds = 0;    ///< slots per user in the blind estimation phase; 0 = pilot_slots
  int detect_slots = 100;
  int pilot_slots = 0;   ///< 0 = 2K
  std::vector<Estimator> estimators{Estimator::BlindVi, Estimator::AidedLs, Estimator::AidedMmse,
                                    Estimator::PerfectCsi};
  std::uint64_t seed = 1;
  int threads = 1;
  bool record_wall_time = false;
  VIConfig vi;

  int resolved_pilot_slots() const { return pilot_slots > 0 ? pilot_slots : 2 * users; }
  int resolved_est_rounds() const { return est_rounds > 0 ? est_rounds : resolved_pilot_slots(); }

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Flat `key = value` lines; `#` starts a comment. Unknown keys, duplicate
/// keys and malformed values raise ConfigError with the line number.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
/// Writes every key; parse_config(serialize_config(c)) reproduces c exactly.
std::string serialize_config(const ExperimentConfig& config);

struct ResultRow {
  std::string estimator;
  double snr_db = 0.0;
  double mse_raw = 0.0;
  double mse_aligned = 0.0;
  double ser = 0.0;
  int blocks = 0;
  double wall_time_s = 0.0;
};

/// Scales each column by the least-squares complex factor onto the truth.
/// Zero columns pass through. Throws DomainError on a shape mismatch.
ComplexMatrix align_channel(const ComplexMatrix& h_hat, const ComplexMatrix& h_true);

/// |H_hat - H|_F^2 / (N K). Throws DomainError on a shape mismatch.
double mse(const ComplexMatrix& h_hat, const ComplexMatrix& h_true);

/// Everything one block produces for one estimator.
struct BlockResult {
  double mse_raw = 0.0;
  double mse_aligned = 0.0;
  double ser = 0.0;
  double seconds = 0.0;
};

/// One coherence block at grid index `point`; results follow config.estimators.
std::vector<BlockResult> run_block(const ExperimentConfig& config, double snr_db,
                                   std::uint64_t point, std::uint64_t block);

/// Means over config.blocks independent blocks.
std::vector<ResultRow> run_point(const ExperimentConfig& config, double snr_db,
                                 std::uint64_t point = 0);

std::vector<ResultRow> sweep(const ExperimentConfig& config);

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
/// Throws Error with the path on I/O failure.
void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);

struct ConstellationPoint {
  std::string stage;  ///< "pre" or "post"
  int slot = 0;
  int user = 0;
  cd value;
  int truth = 0;
};

/// Which channel the post-equalization stage inverts.
enum class EqualizerCsi { Blind, Perfect };

/// Received components ("pre", antenna n attributed to user n mod K) and
/// per-slot least-squares equalized symbols ("post") of one detection frame.
std::vector<ConstellationPoint> dump_constellation(const ExperimentConfig& config, double snr_db,
                                                   Rng& rng,
                                                   EqualizerCsi csi = EqualizerCsi::Blind);

void write_constellation_csv(std::ostream& out, const std::vector<ConstellationPoint>& points);

/// Fraction of the points of `stage` whose nearest constellation point is the truth.
double purity(const std::vector<ConstellationPoint>& points, const std::string& stage,
              const Constellation& c);

/// x = (H^H H)^-1 H^H y for each column of `rx`.
ComplexMatrix ls_equalize(const ComplexMatrix& rx, const ComplexMatrix& h);

}  // namespace blindvi

namespace blindvi {

struct GradcheckReport {
  int instances = 0;
  Eigen::Index parameters = 0;  ///< per instance
  double max_error = 0.0;       ///< max over entries of |a - f| / max(|a|, |f|, 1)
};

/// Compares the taped gradient of the block objective (frozen base noise)
/// with central finite differences on random encoders and frames.
GradcheckReport gradient_check(int antennas, int users, int instances, std::uint64_t seed,
                               double step = 1e-5);

}  // namespace blindvi
