#include "blindvi/constellation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "blindvi/errors.hpp"

namespace blindvi {

Modulation parse_modulation(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (lower == "qpsk") return Modulation::Qpsk;
  if (lower == "16qam" || lower == "qam16") return Modulation::Qam16;
  throw ConfigError("unknown modulation '" + name + "' (expected qpsk or 16qam)");
}

std::string to_string(Modulation m) { return m == Modulation::Qpsk ? "qpsk" : "16qam"; }

int Constellation::bits_per_symbol() const noexcept {
  return name == Modulation::Qpsk ? 2 : 4;
}

Constellation make_constellation(Modulation name, double power) {
  if (!(power > 0.0) || !std::isfinite(power)) {
    throw DomainError("constellation power must be finite and > 0");
  }
  Constellation c;
  c.name = name;
  c.power = power;
  const double amp = std::sqrt(power);
  if (name == Modulation::Qpsk) {
    // b0 -> in-phase sign, b1 -> quadrature sign.
    const double s = amp / std::sqrt(2.0);
    for (int i = 0; i < 4; ++i) {
      const int b0 = (i >> 1) & 1;
      const int b1 = i & 1;
      c.points.emplace_back(s * (1 - 2 * b0), s * (1 - 2 * b1));
    }
  } else {
    // b0, b1 signs; b2, b3 pick the inner (1) or outer (3) level.
    const double s = amp / std::sqrt(10.0);
    for (int i = 0; i < 16; ++i) {
      const int b0 = (i >> 3) & 1;
      const int b1 = (i >> 2) & 1;
      const int b2 = (i >> 1) & 1;
      const int b3 = i & 1;
      const double re = (1 - 2 * b0) * (b2 ? 3.0 : 1.0);
      const double im = (1 - 2 * b1) * (b3 ? 3.0 : 1.0);
      c.points.emplace_back(s * re, s * im);
    }
  }
  return c;
}

Constellation make_constellation(const std::string& name, double power) {
  return make_constellation(parse_modulation(name), power);
}

ComplexVector modulate(std::span<const BitGroup> groups, const Constellation& c) {
  const auto width = static_cast<std::size_t>(c.bits_per_symbol());
  ComplexVector out(static_cast<Eigen::Index>(groups.size()));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const BitGroup& bits = groups[g];
    if (bits.size() != width) {
      throw DomainError("modulate: group " + std::to_string(g) + " has " +
                        std::to_string(bits.size()) + " bits, expected " + std::to_string(width));
    }
    int index = 0;
    for (const std::uint8_t b : bits) {
      if (b > 1) throw DomainError("modulate: bit values must be 0 or 1");
      index = (index << 1) | b;
    }
    out[static_cast<Eigen::Index>(g)] = c.points[static_cast<std::size_t>(index)];
  }
  return out;
}

BitGroup bits_of(int index, const Constellation& c) {
  if (index < 0 || index >= c.size()) throw DomainError("bits_of: index out of range");
  const int width = c.bits_per_symbol();
  BitGroup bits(static_cast<std::size_t>(width));
  for (int b = 0; b < width; ++b) {
    bits[static_cast<std::size_t>(b)] = static_cast<std::uint8_t>((index >> (width - 1 - b)) & 1);
  }
  return bits;
}

int demodulate_hard(cd y, const Constellation& c) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < c.size(); ++i) {
    const double d = std::norm(y - c.points[static_cast<std::size_t>(i)]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace blindvi
