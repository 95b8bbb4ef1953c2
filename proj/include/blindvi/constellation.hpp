#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "blindvi/linalg.hpp"

namespace blindvi {

enum class Modulation { Qpsk, Qam16 };

/// Parses "qpsk" / "16qam" (also "qam16"), case-insensitive. Throws ConfigError.
Modulation parse_modulation(const std::string& name);
std::string to_string(Modulation m);

/// Gray-mapped alphabet with average symbol energy `power`.
///
/// Point i carries the bit group whose MSB-first binary value is i.
struct Constellation {
  Modulation name = Modulation::Qpsk;
  std::vector<cd> points;
  double power = 1.0;

  int size() const noexcept { return static_cast<int>(points.size()); }
  int bits_per_symbol() const noexcept;
};

Constellation make_constellation(Modulation name, double power = 1.0);
Constellation make_constellation(const std::string& name, double power = 1.0);

using BitGroup = std::vector<std::uint8_t>;

/// One point per bit group. Throws DomainError on a wrong group width or a
/// non-binary entry.
ComplexVector modulate(std::span<const BitGroup> groups, const Constellation& c);

/// Bits of point `index`, MSB first.
BitGroup bits_of(int index, const Constellation& c);

/// Nearest point by Euclidean distance; ties go to the lowest index.
int demodulate_hard(cd y, const Constellation& c);

}  // namespace blindvi
