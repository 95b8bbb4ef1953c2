#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "blindvi/baselines.hpp"
#include "blindvi/errors.hpp"
#include "blindvi/harness.hpp"

namespace {

using namespace blindvi;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string estimators;
  std::optional<int> threads;
  std::optional<int> blocks;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "key = value experiment file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "override the configured seed");
  cmd->add_option("--out", o.out, "output path (default: stdout)");
  cmd->add_option("--estimators", o.estimators,
                  "comma-separated subset of Blind-VI,Aided-LS,Aided-MMSE,Perfect-CSI");
  cmd->add_option("--threads", o.threads, "worker threads per grid point");
  cmd->add_option("--blocks", o.blocks, "override blocks per grid point");
}

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (!o.estimators.empty()) c.estimators = parse_estimator_list(o.estimators);
  if (o.threads) c.threads = *o.threads;
  if (o.blocks) c.blocks = *o.blocks;
  c.validate();
  return c;
}

template <typename Writer>
void emit(const std::string& path, Writer&& write) {
  if (path.empty()) {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write(out);
  out.flush();
  if (!out) throw Error("write to '" + path + "' failed");
}

int run_sweep(const CommonOptions& o) {
  const ExperimentConfig c = resolve(o);
  const auto rows = sweep(c);
  emit(o.out, [&](std::ostream& s) { write_results_csv(s, rows); });
  return kOk;
}

int run_constellation(const CommonOptions& o, double snr_db, const std::string& csi) {
  const ExperimentConfig c = resolve(o);
  EqualizerCsi which;
  if (csi == "blind") {
    which = EqualizerCsi::Blind;
  } else if (csi == "perfect") {
    which = EqualizerCsi::Perfect;
  } else {
    throw ConfigError("--csi must be 'blind' or 'perfect'");
  }
  Rng rng(c.seed);
  const auto points = dump_constellation(c, snr_db, rng, which);
  emit(o.out, [&](std::ostream& s) { write_constellation_csv(s, points); });
  const Constellation alphabet = make_constellation(c.modulation, c.power);
  std::fprintf(stderr, "purity pre %.4f post %.4f\n", purity(points, "pre", alphabet),
               purity(points, "post", alphabet));
  return kOk;
}

int run_gradcheck(int antennas, int users, int instances, std::uint64_t seed, double tol) {
  const GradcheckReport r = gradient_check(antennas, users, instances, seed);
  std::printf("gradcheck N=%d K=%d instances=%d parameters=%ld max_error=%.3e %s\n", antennas,
              users, r.instances, static_cast<long>(r.parameters), r.max_error,
              r.max_error < tol ? "ok" : "FAILED");
  return r.max_error < tol ? kOk : kRuntimeError;
}

int run_selftest() {
  int failures = 0;
  auto check = [&](bool ok, const std::string& what) {
    std::printf("%s %s\n", ok ? "ok  " : "FAIL", what.c_str());
    if (!ok) ++failures;
  };

  Rng rng(11);
  const ComplexMatrix h = draw_channel(4, 4, rng).h;
  const PilotMatrix p = make_orthogonal_pilots(4, 8);
  const ComplexMatrix y = h * p.p;
  check(mse(ls_estimate(y, p), h) < 1e-20, "noiseless LS recovers the channel");
  check((mmse_estimate(y, p, 0.0) - ls_estimate(y, p)).norm() == 0.0, "MMSE at zero noise is LS");

  const GradcheckReport g = gradient_check(2, 2, 4, 5);
  check(g.max_error < 1e-4, "objective gradient matches finite differences");

  ExperimentConfig c;
  c.blocks = 2;
  c.detect_slots = 8;
  c.snr_grid_db = {10.0};
  c.vi.max_iters = 60;
  std::ostringstream a;
  std::ostringstream b;
  write_results_csv(a, sweep(c));
  write_results_csv(b, sweep(c));
  check(a.str() == b.str(), "sweep is deterministic");

  std::istringstream cfg(serialize_config(c));
  check(serialize_config(parse_config(cfg)) == serialize_config(c), "config round trip");
  return failures == 0 ? kOk : kRuntimeError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind MIMO channel estimation by variational inference"};
  app.require_subcommand(1);

  CommonOptions sweep_opts;
  auto* sweep_cmd = app.add_subcommand("sweep", "SNR sweep of MSE and SER, written as CSV");
  add_common(sweep_cmd, sweep_opts);

  CommonOptions const_opts;
  double snr_db = 20.0;
  std::string csi = "blind";
  auto* const_cmd =
      app.add_subcommand("constellation", "pre/post equalization scatter of one detection frame");
  add_common(const_cmd, const_opts);
  const_cmd->add_option("--snr", snr_db, "SNR in dB")->capture_default_str();
  const_cmd->add_option("--csi", csi, "channel used by the equalizer: blind or perfect")
      ->capture_default_str();

  int gc_antennas = 2;
  int gc_users = 2;
  int gc_instances = 50;
  std::uint64_t gc_seed = 1;
  double gc_tol = 1e-4;
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of the VI gradient");
  gc_cmd->add_option("--antennas", gc_antennas)->capture_default_str();
  gc_cmd->add_option("--users", gc_users)->capture_default_str();
  gc_cmd->add_option("--instances", gc_instances)->capture_default_str();
  gc_cmd->add_option("--seed", gc_seed)->capture_default_str();
  gc_cmd->add_option("--tolerance", gc_tol)->capture_default_str();

  auto* self_cmd = app.add_subcommand("selftest", "quick consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*sweep_cmd) return run_sweep(sweep_opts);
    if (*const_cmd) return run_constellation(const_opts, snr_db, csi);
    if (*gc_cmd) return run_gradcheck(gc_antennas, gc_users, gc_instances, gc_seed, gc_tol);
    if (*self_cmd) return run_selftest();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
  return kRuntimeError;
}
