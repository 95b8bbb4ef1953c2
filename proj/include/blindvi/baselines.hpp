#pragma once

#include "blindvi/linalg.hpp"

namespace blindvi {

/// K x T_p pilot block known at the receiver.
struct PilotMatrix {
  ComplexMatrix p;
  double power = 1.0;

  int users() const noexcept { return static_cast<int>(p.rows()); }
  int length() const noexcept { return static_cast<int>(p.cols()); }
};

/// Rows of a Hadamard matrix when T_p is a power of two, of the DFT matrix
/// otherwise, scaled so that P P^H = T_p * power * I. Throws ConfigError if T_p < K.
PilotMatrix make_orthogonal_pilots(int users, int length, double power = 1.0);

/// H = Y P^H (P P^H)^-1. Throws ShapeError, LinalgError when P P^H is singular.
ComplexMatrix ls_estimate(const ComplexMatrix& y, const PilotMatrix& pilots);

/// H = Y P^H (P P^H + noise_var I)^-1 for an i.i.d. CN(0, 1) channel.
ComplexMatrix mmse_estimate(const ComplexMatrix& y, const PilotMatrix& pilots, double noise_var);

}  // namespace blindvi
