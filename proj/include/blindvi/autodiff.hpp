#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "blindvi/linalg.hpp"

/// Minimal reverse-mode differentiation over dense real matrices.
///
/// Only the primitives declared below can be recorded. Every recorded value
/// is checked for finiteness; a NaN or infinity raises NumericError naming
/// the primitive that produced it.
namespace blindvi::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;

  const RealMatrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Receives the gradient flowing into the node being unwound.
  using Backprop = std::function<void(Tape&, const RealMatrix& upstream)>;

  Var variable(RealMatrix value);
  Var constant(RealMatrix value);

  /// Reverse sweep from a 1x1 root.
  void backward(const Var& root);
  /// Gradient of the last backward root with respect to `v` (zeros if unreached).
  RealMatrix gradient(const Var& v) const;

  std::size_t size() const noexcept { return nodes_.size(); }

  // Primitive plumbing.
  Var record(const char* op, RealMatrix value, bool requires_grad, Backprop backprop);
  const RealMatrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  void accumulate(std::size_t id, const RealMatrix& g);

 private:
  struct Node {
    const char* op;
    RealMatrix value;
    RealMatrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backprop backprop;
  };
  std::vector<Node> nodes_;
};

// Elementwise arithmetic. Shapes must match exactly.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var square(const Var& a);

Var tanh(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
/// Pass-through inside [lo, hi], zero gradient outside.
Var clamp(const Var& a, double lo, double hi);

/// W * X + b, with the column b broadcast over the columns of X.
Var affine(const Var& w, const Var& x, const Var& b);
/// Constant matrix on the left: A * x.
Var lmul(const RealMatrix& a, const Var& x);
/// Constant matrix on the right: x * B.
Var rmul(const Var& x, const RealMatrix& b);

/// Sum of all entries, as a 1x1 node.
Var sum(const Var& a);
/// Rows [start, start + count).
Var rows(const Var& a, Eigen::Index start, Eigen::Index count);
/// Entries [offset, offset + r*c) of a column vector, reshaped column-major.
Var segment(const Var& a, Eigen::Index offset, Eigen::Index r, Eigen::Index c);
/// Horizontal concatenation of `times` copies.
Var tile_cols(const Var& a, Eigen::Index times);

/// mean + sqrt(var) .* noise with the base noise frozen.
Var reparam(const Var& mean, const Var& var, const RealMatrix& noise);

/// Batched complex matrix-vector products in stacked-real layout.
///
/// Column j of `h` is a stacked N x K complex matrix (2NK reals, column-major
/// flattening); column i of `x` a stacked K-vector. With G = cols(h) and
/// cols(x) = G * S, column i of the result is h[:, i / S] * x[:, i].
Var cmatvec(const Var& h, const Var& x, Eigen::Index n, Eigen::Index k);

/// out(r) = sum_t weights(group[r], t) * a(r, t), a column vector.
Var weighted_row_sum(const Var& a, const std::vector<Eigen::Index>& group,
                     const RealMatrix& weights);

/// Scalar function of a parameter vector recorded on a tape.
using ScalarFn = std::function<Var(Tape&, const Var& params)>;

/// Exact gradient of `fn` at `params` by reverse accumulation.
RealVector grad(const ScalarFn& fn, const RealVector& params);
/// Value and gradient in one sweep.
double value_and_grad(const ScalarFn& fn, const RealVector& params, RealVector& gradient);

}  // namespace blindvi::ad
