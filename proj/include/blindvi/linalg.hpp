#pragma once

#include <complex>

#include <Eigen/Dense>

namespace blindvi {

using cd = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Complex matrix product with shape checking.
ComplexMatrix cmatmul(const ComplexMatrix& a, const ComplexMatrix& b);

/// Conjugate transpose.
ComplexMatrix hermitian(const ComplexMatrix& a);

/// Real-valued vector holding a complex vector as [Re(z); Im(z)].
///
/// Matrices are flattened column-major before stacking, so an N x K channel
/// occupies 2NK entries with all real parts first.
class StackedRealVector {
 public:
  StackedRealVector() = default;
  /// Throws DomainError if `values` has odd length.
  explicit StackedRealVector(RealVector values);

  static StackedRealVector from_complex(const ComplexVector& z);
  static StackedRealVector from_matrix(const ComplexMatrix& m);

  ComplexVector to_complex() const;
  ComplexMatrix to_matrix(Eigen::Index rows, Eigen::Index cols) const;

  Eigen::Index dim() const noexcept { return values_.size(); }
  Eigen::Index complex_dim() const noexcept { return values_.size() / 2; }
  const RealVector& values() const noexcept { return values_; }
  RealVector& values() noexcept { return values_; }

 private:
  RealVector values_;
};

/// Stack every column of `z` (rows: complex dim) into a 2*rows real matrix.
RealMatrix stack_columns(const ComplexMatrix& z);
ComplexMatrix unstack_columns(const RealMatrix& s);

/// Real block form [[Re, -Im], [Im, Re]] acting on stacked vectors.
RealMatrix real_block(const ComplexMatrix& a);

}  // namespace blindvi
