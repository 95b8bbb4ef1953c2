#include "blindvi/linalg.hpp"

#include <string>

#include "blindvi/errors.hpp"

namespace blindvi {

ComplexMatrix cmatmul(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("cmatmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  return a * b;
}

ComplexMatrix hermitian(const ComplexMatrix& a) { return a.adjoint(); }

StackedRealVector::StackedRealVector(RealVector values) : values_(std::move(values)) {
  if (values_.size() % 2 != 0) {
    throw DomainError("stacked real vector needs even length, got " +
                      std::to_string(values_.size()));
  }
}

StackedRealVector StackedRealVector::from_complex(const ComplexVector& z) {
  RealVector v(2 * z.size());
  v.head(z.size()) = z.real();
  v.tail(z.size()) = z.imag();
  return StackedRealVector(std::move(v));
}

StackedRealVector StackedRealVector::from_matrix(const ComplexMatrix& m) {
  const ComplexVector flat = m.reshaped();
  return from_complex(flat);
}

ComplexVector StackedRealVector::to_complex() const {
  const Eigen::Index n = complex_dim();
  ComplexVector z(n);
  z.real() = values_.head(n);
  z.imag() = values_.tail(n);
  return z;
}

ComplexMatrix StackedRealVector::to_matrix(Eigen::Index rows, Eigen::Index cols) const {
  if (rows * cols != complex_dim()) {
    throw ShapeError("stacked vector of complex dim " + std::to_string(complex_dim()) +
                     " cannot form a " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " matrix");
  }
  return to_complex().reshaped(rows, cols);
}

RealMatrix stack_columns(const ComplexMatrix& z) {
  RealMatrix s(2 * z.rows(), z.cols());
  s.topRows(z.rows()) = z.real();
  s.bottomRows(z.rows()) = z.imag();
  return s;
}

ComplexMatrix unstack_columns(const RealMatrix& s) {
  if (s.rows() % 2 != 0) throw DomainError("unstack_columns: odd row count");
  const Eigen::Index n = s.rows() / 2;
  ComplexMatrix z(n, s.cols());
  z.real() = s.topRows(n);
  z.imag() = s.bottomRows(n);
  return z;
}

RealMatrix real_block(const ComplexMatrix& a) {
  const Eigen::Index r = a.rows();
  const Eigen::Index c = a.cols();
  RealMatrix out(2 * r, 2 * c);
  out.topLeftCorner(r, c) = a.real();
  out.topRightCorner(r, c) = -a.imag();
  out.bottomLeftCorner(r, c) = a.imag();
  out.bottomRightCorner(r, c) = a.real();
  return out;
}

}  // namespace blindvi
