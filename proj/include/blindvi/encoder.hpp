#pragma once

#include "blindvi/autodiff.hpp"
#include "blindvi/gaussian.hpp"
#include "blindvi/rng.hpp"

namespace blindvi {

/// Raw log-variance outputs are clamped to this range before exponentiation.
inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 5.0;

/// Two-layer fully connected encoder mapping a stacked received vector to a
/// diagonal Gaussian posterior.
///
/// hidden = tanh(W1 y + b1); out = W2 hidden + b2. The first `out_dim` rows of
/// `out` give the mean as amplitude * tanh(.), the remaining rows the clamped
/// log-variance. Parameters are stored flat: W1 (column-major), b1, W2, b2.
class EncoderNet {
 public:
  EncoderNet() = default;
  /// All-zero parameters.
  EncoderNet(Eigen::Index input_dim, Eigen::Index out_dim, Eigen::Index hidden = 16,
             double amplitude = 3.0);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization of every weight and bias.
  static EncoderNet random(Eigen::Index input_dim, Eigen::Index out_dim, Eigen::Index hidden,
                           double amplitude, Rng& rng);

  Eigen::Index input_dim() const noexcept { return input_dim_; }
  Eigen::Index hidden_dim() const noexcept { return hidden_; }
  Eigen::Index out_dim() const noexcept { return out_dim_; }
  double amplitude() const noexcept { return amplitude_; }
  /// (input_dim + 1) * hidden + (hidden + 1) * 2 * out_dim.
  Eigen::Index parameter_count() const noexcept;

  const RealVector& params() const noexcept { return params_; }
  RealVector& params() noexcept { return params_; }
  void set_params(RealVector params);

  /// Single input. Throws ShapeError on a wrong input size, NumericError on
  /// a non-finite output.
  GaussianPosterior forward(const StackedRealVector& y) const;

  struct Batch {
    RealMatrix mean;  ///< out_dim x T
    RealMatrix var;   ///< out_dim x T
  };
  /// Columns of `ys` are independent inputs.
  Batch forward_batch(const RealMatrix& ys) const;

  struct Vars {
    ad::Var mean;
    ad::Var var;
  };
  /// Records the forward pass, reading this network's parameters from
  /// `packed` starting at `offset`.
  Vars forward(const ad::Var& packed, Eigen::Index offset, const ad::Var& ys) const;

 private:
  Eigen::Index input_dim_ = 0;
  Eigen::Index hidden_ = 0;
  Eigen::Index out_dim_ = 0;
  double amplitude_ = 1.0;
  RealVector params_;
};

}  // namespace blindvi
