#include "specrcv/error.hpp"

#include <charconv>

namespace specrcv {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::NotPSD: return "NotPSD";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::BadSpec: return "BadSpec";
    case ErrorKind::ZeroIncrement: return "ZeroIncrement";
    case ErrorKind::ZeroTrace: return "ZeroTrace";
    case ErrorKind::BadGrid: return "BadGrid";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::BadProfile: return "BadProfile";
    case ErrorKind::BadConfig: return "BadConfig";
    case ErrorKind::FormatMismatch: return "FormatMismatch";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

namespace {

std::string format(double value) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

}  // namespace

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

ZeroIncrementError::ZeroIncrementError(std::size_t row)
    : Error(ErrorKind::ZeroIncrement, "increment row " + std::to_string(row) + " has zero norm"),
      row_(row) {}

NoConvergenceError::NoConvergenceError(std::size_t iterations, double residual,
                                       const std::string& context)
    : Error(ErrorKind::NoConvergence, context + " after " + std::to_string(iterations) +
                                          " iterations (residual " + format(residual) + ")"),
      iterations_(iterations),
      residual_(residual) {}

}  // namespace specrcv
