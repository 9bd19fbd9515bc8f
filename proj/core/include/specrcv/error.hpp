#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace specrcv {

enum class ErrorKind {
  NonFinite,
  NotPSD,
  OutOfDomain,
  BadSpec,
  ZeroIncrement,
  ZeroTrace,
  BadGrid,
  NoConvergence,
  BadProfile,
  BadConfig,
  FormatMismatch,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by the self-normalized estimators when an observed increment has
/// zero Euclidean norm.
class ZeroIncrementError : public Error {
 public:
  explicit ZeroIncrementError(std::size_t row);

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class NoConvergenceError : public Error {
 public:
  NoConvergenceError(std::size_t iterations, double residual, const std::string& context);

  std::size_t iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  std::size_t iterations_;
  double residual_;
};

}  // namespace specrcv
