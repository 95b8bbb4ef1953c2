#include "blindvi/baselines.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "blindvi/errors.hpp"

namespace blindvi {
namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void check_shapes(const ComplexMatrix& y, const PilotMatrix& pilots, const char* who) {
  if (y.cols() != pilots.p.cols()) {
    throw ShapeError(std::string(who) + ": Y has " + std::to_string(y.cols()) +
                     " slots, pilots have " + std::to_string(pilots.p.cols()));
  }
}

}  // namespace

PilotMatrix make_orthogonal_pilots(int users, int length, double power) {
  if (users < 1 || length < users) {
    throw ConfigError("make_orthogonal_pilots: need 1 <= K <= T_p, got K=" +
                      std::to_string(users) + ", T_p=" + std::to_string(length));
  }
  if (!(power > 0.0)) throw ConfigError("make_orthogonal_pilots: power must be positive");
  const double amp = std::sqrt(power);
  PilotMatrix out;
  out.power = power;
  out.p.resize(users, length);
  if (is_power_of_two(length)) {
    // Sylvester construction: entry (i, j) = (-1)^popcount(i & j).
    for (int i = 0; i < users; ++i) {
      for (int j = 0; j < length; ++j) {
        const bool odd = __builtin_popcount(static_cast<unsigned>(i & j)) & 1;
        out.p(i, j) = cd(odd ? -amp : amp, 0.0);
      }
    }
  } else {
    for (int i = 0; i < users; ++i) {
      for (int j = 0; j < length; ++j) {
        const long r = (static_cast<long>(i) * j) % length;
        const double phase = -2.0 * std::numbers::pi * static_cast<double>(r) / length;
        out.p(i, j) = amp * cd(std::cos(phase), std::sin(phase));
      }
    }
  }
  return out;
}

ComplexMatrix ls_estimate(const ComplexMatrix& y, const PilotMatrix& pilots) {
  check_shapes(y, pilots, "ls_estimate");
  const ComplexMatrix ph = pilots.p.adjoint();
  const ComplexMatrix gram = pilots.p * ph;
  Eigen::FullPivLU<ComplexMatrix> lu(gram);
  if (!lu.isInvertible()) throw LinalgError("ls_estimate: P P^H is singular");
  // H = Y P^H G^-1, solved as G^H H^H = (Y P^H)^H with G Hermitian.
  return lu.solve((y * ph).adjoint()).adjoint();
}

ComplexMatrix mmse_estimate(const ComplexMatrix& y, const PilotMatrix& pilots, double noise_var) {
  check_shapes(y, pilots, "mmse_estimate");
  if (!(noise_var >= 0.0)) throw DomainError("mmse_estimate: noise variance must be >= 0");
  if (noise_var == 0.0) return ls_estimate(y, pilots);
  const ComplexMatrix ph = pilots.p.adjoint();
  ComplexMatrix gram = pilots.p * ph;
  gram.diagonal().array() += noise_var;
  return gram.ldlt().solve((y * ph).adjoint()).adjoint();
}

}  // namespace blindvi
