#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "specrcv/covmodel.hpp"
#include "specrcv/diffusion.hpp"

namespace specrcv {

enum class EstimatorKind { RCV, TVARCV, SigmaTilde };

std::string_view to_string(EstimatorKind kind) noexcept;

struct EstimatorOutput {
  CovMatrix matrix;
  EstimatorKind kind;
  std::size_t n;  // intervals actually used
  double trace_over_p;
  std::string spec_digest;
};

struct EstimatorOptions {
  /// Drop zero-norm rows (and use the reduced n) instead of throwing
  /// ZeroIncrementError.
  bool drop_zero_rows = false;
};

/// X^T X for an n x p row matrix. Columns are processed in fixed-width panels
/// in parallel; each panel's arithmetic is independent of the thread count, so
/// the result is bit-stable. Diagonal entries are re-accumulated with
/// compensated summation.
Matrix gram(const Matrix& rows);

/// sum_l |dX_l|^2 with compensated summation.
double realized_trace(const IncrementMatrix& incr);

/// Sigma^RCV = sum_l dX_l dX_l^T.
EstimatorOutput rcv(const IncrementMatrix& incr);

/// Sigma~ = (p / n) sum_l dX_l dX_l^T / |dX_l|^2; its trace is p.
EstimatorOutput sigma_tilde(const IncrementMatrix& incr, const EstimatorOptions& options = {});

/// TVARCV = (tr(Sigma^RCV) / p) * Sigma~.
EstimatorOutput tvarcv(const IncrementMatrix& incr, const EstimatorOptions& options = {});

/// (p / tr(Sigma)) * Sigma. Throws ZeroTrace when tr(Sigma) <= 0.
CovMatrix normalized_icv(const CovMatrix& icv);

struct TraceReport {
  double trace_over_p;
  double theta;
  double relative_deviation;  // |trace_over_p - theta| / theta
  double tolerance;
  bool passed;
};

/// Compares tr(Sigma^RCV) / p against its limit theta.
TraceReport trace_diagnostic(const IncrementMatrix& incr, double theta, double tolerance = 0.05);

}  // namespace specrcv
