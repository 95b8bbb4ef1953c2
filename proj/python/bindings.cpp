#include <optional>
#include <span>
#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "blindvi/baselines.hpp"
#include "blindvi/detection.hpp"
#include "blindvi/errors.hpp"
#include "blindvi/harness.hpp"
#include "blindvi/vi_estimator.hpp"

namespace py = pybind11;
using namespace blindvi;

namespace {

GaussianPosterior make_posterior(const RealVector& mean, const RealVector& var) {
  return GaussianPosterior(StackedRealVector(mean), var);
}

Schedule make_schedule(const std::string& phase, int users, int slots_or_rounds) {
  if (phase == "estimation") return estimation_schedule(users, slots_or_rounds);
  if (phase == "detection") return detection_schedule(users, slots_or_rounds);
  throw ConfigError("phase must be 'estimation' or 'detection'");
}

}  // namespace

PYBIND11_MODULE(_blindvi, m) {
  m.doc() = "Blind MIMO channel estimation by variational inference";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<CapacityError>(m, "CapacityError", base.ptr());
  py::register_exception<LinalgError>(m, "LinalgError", base.ptr());
  py::register_exception<TrainingError>(m, "TrainingError", base.ptr());

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed") = 0)
      .def_static("derive",
                  [](std::uint64_t seed, const std::vector<std::uint64_t>& tags) {
                    return Rng::derive(seed, std::span<const std::uint64_t>(tags));
                  })
      .def("uniform", &Rng::uniform)
      .def("normal", &Rng::normal)
      .def_property_readonly("seed", &Rng::seed)
      .def_property_readonly("counter", &Rng::counter);

  py::class_<Constellation>(m, "Constellation")
      .def_property_readonly("name", [](const Constellation& c) { return to_string(c.name); })
      .def_readonly("points", &Constellation::points)
      .def_readonly("power", &Constellation::power)
      .def_property_readonly("bits_per_symbol", &Constellation::bits_per_symbol)
      .def("__len__", &Constellation::size);
  m.def("make_constellation",
        py::overload_cast<const std::string&, double>(&make_constellation), py::arg("name"),
        py::arg("power") = 1.0);
  m.def("demodulate_hard", &demodulate_hard, py::arg("y"), py::arg("constellation"));

  m.def("noise_var_for_snr", &noise_var_for_snr, py::arg("snr_db"), py::arg("power") = 1.0);
  m.def(
      "draw_channel",
      [](int antennas, int users, Rng& rng) { return draw_channel(antennas, users, rng).h; },
      py::arg("antennas"), py::arg("users"), py::arg("rng"));

  py::class_<Schedule>(m, "Schedule")
      .def(py::init(&make_schedule), py::arg("phase"), py::arg("users"), py::arg("length"))
      .def_property_readonly("length", &Schedule::length)
      .def_readonly("slots", &Schedule::slots)
      .def("mask", &Schedule::mask);

  py::class_<Frame>(m, "Frame")
      .def_readonly("h", &Frame::h)
      .def_readonly("noise_var", &Frame::noise_var)
      .def_readonly("symbols", &Frame::symbols)
      .def_readonly("tx", &Frame::tx)
      .def_readonly("rx", &Frame::rx)
      .def_readonly("schedule", &Frame::schedule);
  m.def(
      "simulate_frame",
      [](const ComplexMatrix& h, const Schedule& schedule, const Constellation& c,
         double noise_var, Rng& rng) {
        return transmit(h, schedule, random_symbols(schedule, c, rng), c, noise_var, rng);
      },
      py::arg("h"), py::arg("schedule"), py::arg("constellation"), py::arg("noise_var"),
      py::arg("rng"));

  m.def(
      "gaussian_kl_diag",
      [](const RealVector& mean, const RealVector& var, double prior_var) {
        return gaussian_kl_diag(make_posterior(mean, var), prior_var);
      },
      py::arg("mean"), py::arg("var"), py::arg("prior_var"));
  m.def(
      "loss1",
      [](const RealVector& mean, const RealVector& var, double power) {
        return loss1(make_posterior(mean, var), power);
      },
      py::arg("mean"), py::arg("var"), py::arg("power") = 1.0);
  m.def(
      "loss2",
      [](const RealVector& mean, const RealVector& var, double prior_var) {
        return loss2(make_posterior(mean, var), prior_var);
      },
      py::arg("mean"), py::arg("var"), py::arg("prior_var") = kChannelPriorVar);
  m.def(
      "loss3_expected",
      [](const RealVector& mh, const RealVector& vh, const RealVector& mx, const RealVector& vx,
         const ComplexVector& y, double weight) {
        return loss3_expected(make_posterior(mh, vh), make_posterior(mx, vx), y, weight);
      },
      py::arg("h_mean"), py::arg("h_var"), py::arg("x_mean"), py::arg("x_var"), py::arg("y"),
      py::arg("weight") = 1.0);

  py::class_<VIConfig>(m, "VIConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &VIConfig::learning_rate)
      .def_readwrite("mc_samples", &VIConfig::mc_samples)
      .def_readwrite("report_samples", &VIConfig::report_samples)
      .def_readwrite("max_iters", &VIConfig::max_iters)
      .def_readwrite("tolerance", &VIConfig::tolerance)
      .def_readwrite("window", &VIConfig::window)
      .def_readwrite("lr_drops", &VIConfig::lr_drops)
      .def_readwrite("lr_drop_factor", &VIConfig::lr_drop_factor)
      .def_readwrite("hidden", &VIConfig::hidden)
      .def_readwrite("amplitude", &VIConfig::amplitude)
      .def_readwrite("noise_floor", &VIConfig::noise_floor)
      .def_readwrite("record_terms", &VIConfig::record_terms);

  py::class_<BlockEstimate>(m, "BlockEstimate")
      .def_readonly("h_hat", &BlockEstimate::h_hat)
      .def_readonly("x_hat", &BlockEstimate::x_hat)
      .def_readonly("loss_trace", &BlockEstimate::loss_trace)
      .def_readonly("final_loss", &BlockEstimate::final_loss)
      .def_readonly("iterations", &BlockEstimate::iterations)
      .def_readonly("converged", &BlockEstimate::converged);
  m.def(
      "fit_block", [](const Frame& f, const VIConfig& cfg, Rng& rng) { return fit_block(f, cfg, rng); },
      py::arg("frame"), py::arg("config") = VIConfig{}, py::arg("rng"),
      py::call_guard<py::gil_scoped_release>());

  py::class_<PilotMatrix>(m, "PilotMatrix")
      .def_readonly("p", &PilotMatrix::p)
      .def_readonly("power", &PilotMatrix::power);
  m.def("make_orthogonal_pilots", &make_orthogonal_pilots, py::arg("users"), py::arg("length"),
        py::arg("power") = 1.0);
  m.def("ls_estimate", &ls_estimate, py::arg("y"), py::arg("pilots"));
  m.def("mmse_estimate", &mmse_estimate, py::arg("y"), py::arg("pilots"), py::arg("noise_var"));

  m.def(
      "mld_detect",
      [](const ComplexVector& y, const ComplexMatrix& h, const Constellation& c,
         std::optional<std::vector<bool>> active) {
        return mld_detect(y, h, c, active.value_or(std::vector<bool>(h.cols(), true)));
      },
      py::arg("y"), py::arg("h"), py::arg("constellation"), py::arg("active") = py::none());
  m.def("ser", &ser, py::arg("decided"), py::arg("truth"));
  m.def("align_channel", &align_channel, py::arg("h_hat"), py::arg("h_true"));
  m.def("mse", &mse, py::arg("h_hat"), py::arg("h_true"));

  m.def(
      "parse_config",
      [](const std::string& text) {
        std::istringstream in(text);
        return serialize_config(parse_config(in));
      },
      py::arg("text"), "Validate a config text; returns it with every key filled in.");
  m.def(
      "sweep",
      [](const std::string& config_text) {
        std::istringstream in(config_text);
        const ExperimentConfig c = parse_config(in);
        std::vector<ResultRow> rows;
        {
          py::gil_scoped_release release;
          rows = sweep(c);
        }
        py::list out;
        for (const auto& r : rows) {
          py::dict d;
          d["estimator"] = r.estimator;
          d["snr_db"] = r.snr_db;
          d["mse_raw"] = r.mse_raw;
          d["mse_aligned"] = r.mse_aligned;
          d["ser"] = r.ser;
          d["blocks"] = r.blocks;
          d["wall_time_s"] = r.wall_time_s;
          out.append(d);
        }
        return out;
      },
      py::arg("config_text"));
  m.def(
      "sweep_csv",
      [](const std::string& config_text) {
        std::istringstream in(config_text);
        const ExperimentConfig c = parse_config(in);
        std::ostringstream out;
        py::gil_scoped_release release;
        write_results_csv(out, sweep(c));
        return out.str();
      },
      py::arg("config_text"));
  m.def(
      "gradient_check",
      [](int antennas, int users, int instances, std::uint64_t seed) {
        const GradcheckReport r = gradient_check(antennas, users, instances, seed);
        return r.max_error;
      },
      py::arg("antennas") = 2, py::arg("users") = 2, py::arg("instances") = 5,
      py::arg("seed") = 1);
}
