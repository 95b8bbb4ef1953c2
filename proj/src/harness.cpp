#include "blindvi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <istream>
#include <map>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "blindvi/baselines.hpp"
#include "blindvi/detection.hpp"
#include "blindvi/errors.hpp"

namespace blindvi {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string exact(double v) { return fmt("%.17g", v); }

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || std::isnan(d)) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
  return d;
}

long long to_integer(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long n = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size()) {
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  }
  return n;
}

int to_int(const std::string& key, const std::string& v) {
  const long long n = to_integer(key, v);
  if (n < std::numeric_limits<int>::min() || n > std::numeric_limits<int>::max()) {
    throw ConfigError("'" + key + "' is out of range");
  }
  return static_cast<int>(n);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  char* end = nullptr;
  if (v.empty() || v[0] == '-') throw ConfigError("'" + key + "' expects an unsigned integer");
  const unsigned long long n = std::strtoull(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size()) {
    throw ConfigError("'" + key + "' expects an unsigned integer, got '" + v + "'");
  }
  return n;
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string l = lower(v);
  if (l == "true" || l == "1" || l == "yes") return true;
  if (l == "false" || l == "0" || l == "no") return false;
  throw ConfigError("'" + key + "' expects true/false, got '" + v + "'");
}

NoiseWeighting to_weighting(const std::string& v) {
  const std::string l = lower(v);
  if (l == "exact") return NoiseWeighting::Exact;
  if (l == "unit") return NoiseWeighting::Unit;
  throw ConfigError("vi.weighting must be 'exact' or 'unit', got '" + v + "'");
}

Fusion to_fusion(const std::string& v) {
  const std::string l = lower(v);
  if (l == "block") return Fusion::Block;
  if (l == "per-slot" || l == "per_slot" || l == "perslot") return Fusion::PerSlot;
  throw ConfigError("vi.fusion must be 'block' or 'per-slot', got '" + v + "'");
}

using Setter = void (*)(ExperimentConfig&, const std::string&, const std::string&);

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"antennas", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.antennas = to_int(k, v);
       }},
      {"users", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.users = to_int(k, v);
       }},
      {"modulation", [](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.modulation = parse_modulation(v);
       }},
      {"power", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.power = to_double(k, v);
       }},
      {"snr_grid_db", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.snr_grid_db.clear();
         for (const auto& item : split(v, ',')) c.snr_grid_db.push_back(to_double(k, item));
       }},
      {"blocks", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.blocks = to_int(k, v);
       }},
      {"est_rounds", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.est_rounds = to_int(k, v);
       }},
      {"detect_slots", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.detect_slots = to_int(k, v);
       }},
      {"pilot_slots", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.pilot_slots = to_int(k, v);
       }},
      {"estimators", [](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.estimators = parse_estimator_list(v);
       }},
      {"seed", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.seed = to_u64(k, v);
       }},
      {"threads", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.threads = to_int(k, v);
       }},
      {"record_wall_time", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.record_wall_time = to_bool(k, v);
       }},
      {"vi.learning_rate", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.vi.learning_rate = to_double(k, v);
       }},
      {"vi.mc_samples", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.vi.mc_samples = to_int(k, v);
       }},
      {"vi.report_samples", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.vi.report_samples = to_int(k, v);
       }},
      {"vi.max_iters", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.vi.max_iters = to_int(k, v);
       }},
      {"vi.tolerance", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.vi.tolerance = to_double(k, v);
       }},
      {"vi.window", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.vi.window = to_int(k, v);
       }},
      {"vi.lr_drops", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.vi.lr_drops = to_int(k, v);
       }},
      {"vi.lr_drop_factor", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.vi.lr_drop_factor = to_double(k, v);
       }},
      {"vi.hidden", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.vi.hidden = to_int(k, v);
       }},
      {"vi.amplitude", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.vi.amplitude = to_double(k, v);
       }},
      {"vi.weighting", [](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.vi.weighting = to_weighting(v);
       }},
      {"vi.model_noise_var", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.vi.model_noise_var = to_double(k, v);
       }},
      {"vi.noise_floor", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.vi.noise_floor = to_double(k, v);
       }},
      {"vi.fusion", [](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.vi.fusion = to_fusion(v);
       }},
      {"vi.channel_prior_var",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.vi.channel_prior_var = to_double(k, v);
       }},
  };
  return table;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::BlindVi: return "Blind-VI";
    case Estimator::AidedLs: return "Aided-LS";
    case Estimator::AidedMmse: return "Aided-MMSE";
    case Estimator::PerfectCsi: return "Perfect-CSI";
  }
  return "?";
}

Estimator parse_estimator(const std::string& name) {
  const std::string l = lower(trim(name));
  for (Estimator e : {Estimator::BlindVi, Estimator::AidedLs, Estimator::AidedMmse,
                      Estimator::PerfectCsi}) {
    if (lower(to_string(e)) == l) return e;
  }
  throw ConfigError("unknown estimator '" + name +
                    "' (expected Blind-VI, Aided-LS, Aided-MMSE or Perfect-CSI)");
}

std::vector<Estimator> parse_estimator_list(const std::string& list) {
  std::vector<Estimator> out;
  for (const auto& item : split(list, ',')) {
    const Estimator e = parse_estimator(item);
    if (std::find(out.begin(), out.end(), e) != out.end()) {
      throw ConfigError("estimator '" + item + "' listed twice");
    }
    out.push_back(e);
  }
  if (out.empty()) throw ConfigError("estimator list is empty");
  return out;
}

void ExperimentConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
  };
  positive(antennas, "antennas");
  positive(users, "users");
  positive(blocks, "blocks");
  positive(detect_slots, "detect_slots");
  positive(threads, "threads");
  if (est_rounds < 0) throw ConfigError("est_rounds must be >= 0 (0 selects pilot_slots)");
  if (pilot_slots < 0) throw ConfigError("pilot_slots must be >= 0 (0 selects 2K)");
  if (resolved_pilot_slots() < users) throw ConfigError("pilot_slots must be >= users");
  if (!(power > 0.0) || !std::isfinite(power)) throw ConfigError("power must be positive");
  if (snr_grid_db.empty()) throw ConfigError("snr_grid_db must not be empty");
  if (estimators.empty()) throw ConfigError("estimators must not be empty");
  positive(vi.mc_samples, "vi.mc_samples");
  positive(vi.report_samples, "vi.report_samples");
  positive(vi.max_iters, "vi.max_iters");
  positive(vi.hidden, "vi.hidden");
  if (vi.window < 0) throw ConfigError("vi.window must be >= 0");
  if (!(vi.learning_rate > 0.0)) throw ConfigError("vi.learning_rate must be positive");
  if (vi.lr_drops < 0) throw ConfigError("vi.lr_drops must be >= 0");
  if (!(vi.lr_drop_factor > 0.0 && vi.lr_drop_factor <= 1.0)) {
    throw ConfigError("vi.lr_drop_factor must lie in (0, 1]");
  }
  if (!(vi.tolerance >= 0.0)) throw ConfigError("vi.tolerance must be >= 0");
  if (!(vi.amplitude >= 0.0)) throw ConfigError("vi.amplitude must be >= 0");
  if (!(vi.model_noise_var >= 0.0)) throw ConfigError("vi.model_noise_var must be >= 0");
  if (!(vi.noise_floor > 0.0)) throw ConfigError("vi.noise_floor must be positive");
  if (!(vi.channel_prior_var > 0.0)) throw ConfigError("vi.channel_prior_var must be positive");
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::map<std::string, int> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (const auto prev = seen.find(key); prev != seen.end()) {
      throw ConfigError("line " + std::to_string(lineno) + ": '" + key +
                        "' already set on line " + std::to_string(prev->second));
    }
    seen.emplace(key, lineno);
    try {
      it->second(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return parse_config(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  std::string grid;
  for (std::size_t i = 0; i < c.snr_grid_db.size(); ++i) {
    grid += (i ? "," : "") + exact(c.snr_grid_db[i]);
  }
  std::string est;
  for (std::size_t i = 0; i < c.estimators.size(); ++i) {
    est += (i ? "," : "") + to_string(c.estimators[i]);
  }
  out << "antennas = " << c.antennas << "\n"
      << "users = " << c.users << "\n"
      << "modulation = " << to_string(c.modulation) << "\n"
      << "power = " << exact(c.power) << "\n"
      << "snr_grid_db = " << grid << "\n"
      << "blocks = " << c.blocks << "\n"
      << "est_rounds = " << c.est_rounds << "\n"
      << "detect_slots = " << c.detect_slots << "\n"
      << "pilot_slots = " << c.pilot_slots << "\n"
      << "estimators = " << est << "\n"
      << "seed = " << c.seed << "\n"
      << "threads = " << c.threads << "\n"
      << "record_wall_time = " << (c.record_wall_time ? "true" : "false") << "\n"
      << "vi.learning_rate = " << exact(c.vi.learning_rate) << "\n"
      << "vi.mc_samples = " << c.vi.mc_samples << "\n"
      << "vi.report_samples = " << c.vi.report_samples << "\n"
      << "vi.max_iters = " << c.vi.max_iters << "\n"
      << "vi.tolerance = " << exact(c.vi.tolerance) << "\n"
      << "vi.window = " << c.vi.window << "\n"
      << "vi.lr_drops = " << c.vi.lr_drops << "\n"
      << "vi.lr_drop_factor = " << exact(c.vi.lr_drop_factor) << "\n"
      << "vi.hidden = " << c.vi.hidden << "\n"
      << "vi.amplitude = " << exact(c.vi.amplitude) << "\n"
      << "vi.weighting = " << (c.vi.weighting == NoiseWeighting::Exact ? "exact" : "unit") << "\n"
      << "vi.model_noise_var = " << exact(c.vi.model_noise_var) << "\n"
      << "vi.noise_floor = " << exact(c.vi.noise_floor) << "\n"
      << "vi.fusion = " << (c.vi.fusion == Fusion::Block ? "block" : "per-slot") << "\n"
      << "vi.channel_prior_var = " << exact(c.vi.channel_prior_var) << "\n";
  return out.str();
}

ComplexMatrix align_channel(const ComplexMatrix& h_hat, const ComplexMatrix& h_true) {
  if (h_hat.rows() != h_true.rows() || h_hat.cols() != h_true.cols()) {
    throw DomainError("align_channel: shape mismatch");
  }
  ComplexMatrix out = h_hat;
  for (Eigen::Index k = 0; k < h_hat.cols(); ++k) {
    const double energy = h_hat.col(k).squaredNorm();
    if (energy == 0.0) continue;
    const cd alpha = h_hat.col(k).dot(h_true.col(k)) / energy;
    out.col(k) *= alpha;
  }
  return out;
}

double mse(const ComplexMatrix& h_hat, const ComplexMatrix& h_true) {
  if (h_hat.rows() != h_true.rows() || h_hat.cols() != h_true.cols()) {
    throw DomainError("mse: shape mismatch");
  }
  if (h_hat.size() == 0) throw DomainError("mse: empty matrices");
  return (h_hat - h_true).squaredNorm() / static_cast<double>(h_hat.size());
}

std::vector<BlockResult> run_block(const ExperimentConfig& config, double snr_db,
                                   std::uint64_t point, std::uint64_t block) {
  const int n = config.antennas;
  const int k = config.users;
  const Constellation c = make_constellation(config.modulation, config.power);
  const double noise_var = noise_var_for_snr(snr_db, config.power);
  auto stream = [&](std::uint64_t tag) { return Rng(Rng::derive(config.seed, {point, block, tag})); };

  Rng channel_rng = stream(0);
  const ComplexMatrix h = draw_channel(n, k, channel_rng).h;

  // One detection frame shared by every estimator.
  Rng detect_rng = stream(3);
  const Schedule det = detection_schedule(k, config.detect_slots);
  const IndexMatrix det_symbols = random_symbols(det, c, detect_rng);
  const Frame detect = transmit(h, det, det_symbols, c, noise_var, detect_rng);

  std::optional<ComplexMatrix> pilot_rx;
  PilotMatrix pilots;
  auto pilot_observation = [&]() -> const ComplexMatrix& {
    if (!pilot_rx) {
      Rng pilot_rng = stream(2);
      pilots = make_orthogonal_pilots(k, config.resolved_pilot_slots(), config.power);
      pilot_rx = h * pilots.p + complex_noise(n, pilots.length(), noise_var, pilot_rng);
    }
    return *pilot_rx;
  };

  std::vector<BlockResult> out;
  out.reserve(config.estimators.size());
  for (Estimator e : config.estimators) {
    const auto start = std::chrono::steady_clock::now();
    ComplexMatrix h_hat;
    ComplexMatrix h_detect;
    switch (e) {
      case Estimator::BlindVi: {
        Rng est_rng = stream(1);
        const Schedule sched = estimation_schedule(k, config.resolved_est_rounds());
        const IndexMatrix sym = random_symbols(sched, c, est_rng);
        const Frame frame = transmit(h, sched, sym, c, noise_var, est_rng);
        Rng vi_rng = stream(4);
        h_hat = fit_block(frame, config.vi, vi_rng).h_hat;
        // Each column is identifiable only up to a complex factor; the
        // detector receives the estimate with that factor removed.
        h_detect = align_channel(h_hat, h);
        break;
      }
      case Estimator::AidedLs:
        h_hat = ls_estimate(pilot_observation(), pilots);
        h_detect = h_hat;
        break;
      case Estimator::AidedMmse:
        h_hat = mmse_estimate(pilot_observation(), pilots, noise_var);
        h_detect = h_hat;
        break;
      case Estimator::PerfectCsi:
        h_hat = h;
        h_detect = h;
        break;
    }
    BlockResult r;
    r.mse_raw = mse(h_hat, h);
    r.mse_aligned = std::min(mse(align_channel(h_hat, h), h), r.mse_raw);
    r.ser = ser(mld_detect_frame(detect, h_detect), det_symbols);
    r.seconds = seconds_since(start);
    out.push_back(r);
  }
  return out;
}

std::vector<ResultRow> run_point(const ExperimentConfig& config, double snr_db,
                                 std::uint64_t point) {
  config.validate();
  const auto blocks = static_cast<std::size_t>(config.blocks);
  std::vector<std::vector<BlockResult>> results(blocks);
  std::vector<std::exception_ptr> errors(blocks);

  auto work = [&](std::size_t b) {
    try {
      results[b] = run_block(config, snr_db, point, b);
    } catch (const std::exception& e) {
      errors[b] = std::make_exception_ptr(Error("snr " + fmt("%g", snr_db) + " dB, block " +
                                                std::to_string(b) + ": " + e.what()));
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.threads), blocks);
  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) work(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t b = next++; b < blocks; b = next++) work(b);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<ResultRow> rows;
  for (std::size_t i = 0; i < config.estimators.size(); ++i) {
    ResultRow row;
    row.estimator = to_string(config.estimators[i]);
    row.snr_db = snr_db;
    row.blocks = config.blocks;
    for (std::size_t b = 0; b < blocks; ++b) {
      row.mse_raw += results[b][i].mse_raw;
      row.mse_aligned += results[b][i].mse_aligned;
      row.ser += results[b][i].ser;
      row.wall_time_s += results[b][i].seconds;
    }
    row.mse_raw /= static_cast<double>(blocks);
    row.mse_aligned /= static_cast<double>(blocks);
    row.ser /= static_cast<double>(blocks);
    if (!config.record_wall_time) row.wall_time_s = 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::vector<ResultRow> sweep(const ExperimentConfig& config) {
  config.validate();
  std::vector<ResultRow> rows;
  for (std::size_t p = 0; p < config.snr_grid_db.size(); ++p) {
    auto point = run_point(config, config.snr_grid_db[p], p);
    rows.insert(rows.end(), point.begin(), point.end());
  }
  return rows;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "estimator,snr_db,mse_raw,mse_aligned,ser,blocks,wall_time_s\n";
  for (const auto& r : rows) {
    out << r.estimator << ',' << fmt("%.9g", r.snr_db) << ',' << fmt("%.9g", r.mse_raw) << ','
        << fmt("%.9g", r.mse_aligned) << ',' << fmt("%.9g", r.ser) << ',' << r.blocks << ','
        << fmt("%.9g", r.wall_time_s) << '\n';
  }
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_results_csv(out, rows);
  out.flush();
  if (!out) throw Error("write to '" + path + "' failed");
}

ComplexMatrix ls_equalize(const ComplexMatrix& rx, const ComplexMatrix& h) {
  if (rx.rows() != h.rows()) throw ShapeError("ls_equalize: rx and H row counts differ");
  Eigen::ColPivHouseholderQR<ComplexMatrix> qr(h);
  if (qr.rank() < h.cols()) throw LinalgError("ls_equalize: channel is rank deficient");
  return qr.solve(rx);
}

std::vector<ConstellationPoint> dump_constellation(const ExperimentConfig& config, double snr_db,
                                                   Rng& rng, EqualizerCsi csi) {
  config.validate();
  const int n = config.antennas;
  const int k = config.users;
  const Constellation c = make_constellation(config.modulation, config.power);
  const double noise_var = noise_var_for_snr(snr_db, config.power);
  const ComplexMatrix h = draw_channel(n, k, rng).h;

  ComplexMatrix h_eq = h;
  if (csi == EqualizerCsi::Blind) {
    const Schedule sched = estimation_schedule(k, config.resolved_est_rounds());
    const IndexMatrix sym = random_symbols(sched, c, rng);
    const Frame frame = transmit(h, sched, sym, c, noise_var, rng);
    h_eq = align_channel(fit_block(frame, config.vi, rng).h_hat, h);
  }

  const Schedule det = detection_schedule(k, config.detect_slots);
  const IndexMatrix symbols = random_symbols(det, c, rng);
  const Frame frame = transmit(h, det, symbols, c, noise_var, rng);
  const ComplexMatrix x_hat = ls_equalize(frame.rx, h_eq);

  std::vector<ConstellationPoint> out;
  out.reserve(static_cast<std::size_t>((n + k) * frame.slots()));
  for (int t = 0; t < frame.slots(); ++t) {
    for (int a = 0; a < n; ++a) {
      out.push_back({"pre", t, a % k, frame.rx(a, t), symbols(a % k, t)});
    }
  }
  for (int t = 0; t < frame.slots(); ++t) {
    for (int u = 0; u < k; ++u) out.push_back({"post", t, u, x_hat(u, t), symbols(u, t)});
  }
  return out;
}

void write_constellation_csv(std::ostream& out, const std::vector<ConstellationPoint>& points) {
  out << "stage,slot,user,re,im,truth\n";
  for (const auto& p : points) {
    out << p.stage << ',' << p.slot << ',' << p.user << ',' << fmt("%.9g", p.value.real()) << ','
        << fmt("%.9g", p.value.imag()) << ',' << p.truth << '\n';
  }
}

double purity(const std::vector<ConstellationPoint>& points, const std::string& stage,
              const Constellation& c) {
  std::size_t total = 0;
  std::size_t hits = 0;
  for (const auto& p : points) {
    if (p.stage != stage) continue;
    ++total;
    if (demodulate_hard(p.value, c) == p.truth) ++hits;
  }
  if (total == 0) throw DomainError("purity: no points in stage '" + stage + "'");
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace blindvi

namespace blindvi {

GradcheckReport gradient_check(int antennas, int users, int instances, std::uint64_t seed,
                               double step) {
  if (antennas < 1 || users < 1 || instances < 1) {
    throw DomainError("gradient_check: counts must be >= 1");
  }
  if (!(step > 0.0)) throw DomainError("gradient_check: step must be positive");
  GradcheckReport report;
  report.instances = instances;
  const Constellation c = make_constellation(Modulation::Qpsk);
  for (int i = 0; i < instances; ++i) {
    Rng rng(Rng::derive(seed, {static_cast<std::uint64_t>(i)}));
    VIConfig vi;
    vi.hidden = 6;
    VIState state = VIState::create(antennas, users, vi, c.power, rng);
    const ComplexMatrix h = draw_channel(antennas, users, rng).h;
    const Schedule sched = estimation_schedule(users, 2);
    const Frame frame = transmit(h, sched, random_symbols(sched, c, rng), c, 0.1, rng);

    ObjectiveSpec spec;
    spec.antennas = antennas;
    spec.users = users;
    spec.power = c.power;
    spec.weight = likelihood_weight(NoiseWeighting::Exact, 0.1);
    spec.fusion = (i % 2 == 0) ? Fusion::Block : Fusion::PerSlot;
    const RealMatrix ys = stack_columns(frame.rx);
    const RealMatrix mask = sched.mask();
    const RealMatrix noise = gaussian_matrix(2 * antennas * users,
                                             base_noise_cols(spec, frame.slots(), 3), rng);

    auto value = [&](const RealVector& p) {
      ad::Tape tape;
      return record_objective(tape.constant(p), state.encoder_x, state.encoder_h, ys, mask, spec,
                              noise)
          .total.scalar();
    };
    RealVector params = state.packed();
    ad::Tape tape;
    const ad::Var pv = tape.variable(params);
    tape.backward(
        record_objective(pv, state.encoder_x, state.encoder_h, ys, mask, spec, noise).total);
    const RealVector analytic = tape.gradient(pv).col(0);
    report.parameters = params.size();
    for (Eigen::Index j = 0; j < params.size(); ++j) {
      const double saved = params(j);
      params(j) = saved + step;
      const double up = value(params);
      params(j) = saved - step;
      const double down = value(params);
      params(j) = saved;
      const double fd = (up - down) / (2.0 * step);
      const double err = std::abs(analytic(j) - fd) /
                         std::max({std::abs(analytic(j)), std::abs(fd), 1.0});
      report.max_error = std::max(report.max_error, err);
    }
  }
  return report;
}

}  // namespace blindvi
