#include "blindvi/channel.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "blindvi/errors.hpp"

namespace blindvi {

double noise_var_for_snr(double snr_db, double power) {
  return power * std::pow(10.0, -snr_db / 10.0);
}

double snr_db_for(double power, double noise_var) {
  return 10.0 * std::log10(power / noise_var);
}

ComplexMatrix complex_noise(Eigen::Index rows, Eigen::Index cols, double noise_var, Rng& rng) {
  if (noise_var < 0.0) throw DomainError("noise variance must be >= 0");
  const double s = std::sqrt(noise_var / 2.0);
  ComplexMatrix z(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = rng.normal();
      const double im = rng.normal();
      z(i, j) = cd(s * re, s * im);
    }
  }
  return z;
}

ChannelRealization draw_channel(int antennas, int users, Rng& rng, double noise_var,
                                double power) {
  if (antennas < 1 || users < 1) throw DomainError("draw_channel: N and K must be >= 1");
  return ChannelRealization{complex_noise(antennas, users, 1.0, rng), noise_var, power};
}

RealMatrix Schedule::mask() const {
  RealMatrix m = RealMatrix::Zero(users, length());
  for (int t = 0; t < length(); ++t) {
    for (int k = 0; k < users; ++k) m(k, t) = slots[t][k] ? 1.0 : 0.0;
  }
  return m;
}

Schedule estimation_schedule(int users, int rounds) {
  if (users < 1 || rounds < 1) throw DomainError("estimation_schedule: users and rounds >= 1");
  Schedule s{Phase::Estimation, users, {}};
  for (int t = 0; t < users * rounds; ++t) {
    std::vector<bool> slot(static_cast<std::size_t>(users), false);
    slot[static_cast<std::size_t>(t % users)] = true;
    s.slots.push_back(std::move(slot));
  }
  return s;
}

Schedule detection_schedule(int users, int slots) {
  if (users < 1 || slots < 1) throw DomainError("detection_schedule: users and slots >= 1");
  Schedule s{Phase::Detection, users, {}};
  s.slots.assign(static_cast<std::size_t>(slots), std::vector<bool>(users, true));
  return s;
}

IndexMatrix random_symbols(const Schedule& schedule, const Constellation& c, Rng& rng) {
  IndexMatrix idx = IndexMatrix::Constant(schedule.users, schedule.length(), -1);
  for (int t = 0; t < schedule.length(); ++t) {
    for (int k = 0; k < schedule.users; ++k) {
      if (schedule.active(k, t)) idx(k, t) = static_cast<int>(rng.uniform_int(c.size()));
    }
  }
  return idx;
}

Frame transmit(const ComplexMatrix& h, const Schedule& schedule, const IndexMatrix& symbols,
               const Constellation& c, double noise_var, Rng& rng) {
  if (h.cols() != schedule.users) {
    throw ShapeError("transmit: channel has " + std::to_string(h.cols()) + " columns but " +
                     std::to_string(schedule.users) + " users are scheduled");
  }
  if (symbols.rows() != schedule.users || symbols.cols() != schedule.length()) {
    throw ShapeError("transmit: symbol matrix must be users x slots");
  }
  if (noise_var < 0.0) throw DomainError("transmit: noise variance must be >= 0");
  Frame f;
  f.h = h;
  f.schedule = schedule;
  f.constellation = c;
  f.noise_var = noise_var;
  f.symbols = IndexMatrix::Constant(schedule.users, schedule.length(), -1);
  f.tx = ComplexMatrix::Zero(schedule.users, schedule.length());
  for (int t = 0; t < schedule.length(); ++t) {
    for (int k = 0; k < schedule.users; ++k) {
      if (!schedule.active(k, t)) continue;
      const int s = symbols(k, t);
      if (s < 0 || s >= c.size()) throw DomainError("transmit: symbol index out of range");
      f.symbols(k, t) = s;
      f.tx(k, t) = c.points[static_cast<std::size_t>(s)];
    }
  }
  f.rx = h * f.tx;
  if (noise_var > 0.0) f.rx += complex_noise(h.rows(), schedule.length(), noise_var, rng);
  return f;
}

void write_frame_csv(std::ostream& out, const Frame& frame) {
  out << "slot,antenna,re,im\n";
  char buf[64];
  for (Eigen::Index t = 0; t < frame.rx.cols(); ++t) {
    for (Eigen::Index n = 0; n < frame.rx.rows(); ++n) {
      const cd v = frame.rx(n, t);
      std::snprintf(buf, sizeof buf, "%.17g,%.17g", v.real(), v.imag());
      out << t << ',' << n << ',' << buf << '\n';
    }
  }
}

ComplexMatrix read_frame_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "slot,antenna,re,im") {
    throw ConfigError("frame csv: missing 'slot,antenna,re,im' header");
  }
  std::map<std::pair<long, long>, cd> entries;
  long max_slot = -1;
  long max_antenna = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell[4];
    for (auto& c : cell) {
      if (!std::getline(row, c, ',')) throw ConfigError("frame csv: short row '" + line + "'");
    }
    const long t = std::stol(cell[0]);
    const long n = std::stol(cell[1]);
    if (t < 0 || n < 0) throw ConfigError("frame csv: negative index in '" + line + "'");
    entries[{t, n}] = cd(std::stod(cell[2]), std::stod(cell[3]));
    max_slot = std::max(max_slot, t);
    max_antenna = std::max(max_antenna, n);
  }
  const long expected = (max_slot + 1) * (max_antenna + 1);
  if (max_slot < 0 || static_cast<long>(entries.size()) != expected) {
    throw ConfigError("frame csv: entries do not form a complete antenna x slot grid");
  }
  ComplexMatrix rx(max_antenna + 1, max_slot + 1);
  for (const auto& [key, v] : entries) rx(key.second, key.first) = v;
  return rx;
}

}  // namespace blindvi
