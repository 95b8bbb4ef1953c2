#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace blindvi {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a NaN or an infinity.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration: unknown names, missing keys, bad values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The requested enumeration exceeds the configured hypothesis budget.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A linear system could not be solved.
class LinalgError : public Error {
 public:
  using Error::Error;
};

/// Training diverged; carries the loss trace collected so far.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::vector<double> trace)
      : Error(what), trace_(std::move(trace)) {}

  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

}  // namespace blindvi
