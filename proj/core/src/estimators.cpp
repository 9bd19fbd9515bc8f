#include "specrcv/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "specrcv/error.hpp"
#include "specrcv/parallel.hpp"

namespace specrcv {

std::string_view to_string(EstimatorKind kind) noexcept {
  switch (kind) {
    case EstimatorKind::RCV: return "rcv";
    case EstimatorKind::TVARCV: return "tvarcv";
    case EstimatorKind::SigmaTilde: return "sigma_tilde";
  }
  return "unknown";
}

namespace {

constexpr Eigen::Index kPanelWidth = 64;

/// Neumaier summation of v_l^2.
template <class Column>
double compensated_sum_squares(const Column& column) {
  double sum = 0.0;
  double carry = 0.0;
  for (Eigen::Index l = 0; l < column.size(); ++l) {
    const double term = column[l] * column[l];
    const double t = sum + term;
    if (std::abs(sum) >= std::abs(term)) {
      carry += (sum - t) + term;
    } else {
      carry += (term - t) + sum;
    }
    sum = t;
  }
  return sum + carry;
}

void require_finite(const IncrementMatrix& incr) {
  if (!incr.increments().allFinite()) {
    throw Error(ErrorKind::NonFinite, "increments contain NaN or Inf");
  }
}

struct NormalizedRows {
  Matrix rows;
  std::size_t kept;
};

/// Rows divided by their Euclidean norm; zero rows throw or are dropped.
NormalizedRows normalize_rows(const IncrementMatrix& incr, const EstimatorOptions& options) {
  const Matrix& x = incr.increments();
  std::vector<Eigen::Index> keep;
  std::vector<double> norms;
  keep.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index l = 0; l < x.rows(); ++l) {
    const double norm = x.row(l).blueNorm();
    if (norm == 0.0) {
      if (!options.drop_zero_rows) throw ZeroIncrementError(static_cast<std::size_t>(l));
      continue;
    }
    keep.push_back(l);
    norms.push_back(norm);
  }
  if (keep.empty()) throw ZeroIncrementError(0);

  Matrix y(static_cast<Eigen::Index>(keep.size()), x.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    y.row(static_cast<Eigen::Index>(k)) = x.row(keep[k]) / norms[k];
  }
  return {std::move(y), keep.size()};
}

EstimatorOutput make_output(Matrix m, EstimatorKind kind, std::size_t n, const IncrementMatrix& incr) {
  CovMatrix matrix(std::move(m));
  const double trace_over_p = matrix.trace() / static_cast<double>(matrix.dim());
  return {std::move(matrix), kind, n, trace_over_p, incr.spec_digest()};
}

}  // namespace

Matrix gram(const Matrix& rows) {
  const Eigen::Index p = rows.cols();
  Matrix g(p, p);
  const auto panels = static_cast<std::size_t>((p + kPanelWidth - 1) / kPanelWidth);

  parallel_for(panels, [&](std::size_t k) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(k) * kPanelWidth;
    const Eigen::Index w = std::min(kPanelWidth, p - c0);
    const Eigen::Index tail = p - c0;
    g.block(c0, c0, tail, w).noalias() = rows.rightCols(tail).transpose() * rows.middleCols(c0, w);
    for (Eigen::Index j = c0; j < c0 + w; ++j) g(j, j) = compensated_sum_squares(rows.col(j));
  });

  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = j + 1; i < p; ++i) g(j, i) = g(i, j);
  }
  return g;
}

double realized_trace(const IncrementMatrix& incr) {
  const Matrix& x = incr.increments();
  double sum = 0.0;
  double carry = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double term = compensated_sum_squares(x.col(j));
    const double t = sum + term;
    carry += (sum - t) + term;  // terms are nonnegative and |sum| only grows
    sum = t;
  }
  return sum + carry;
}

EstimatorOutput rcv(const IncrementMatrix& incr) {
  require_finite(incr);
  return make_output(gram(incr.increments()), EstimatorKind::RCV, incr.n(), incr);
}

EstimatorOutput sigma_tilde(const IncrementMatrix& incr, const EstimatorOptions& options) {
  require_finite(incr);
  NormalizedRows normalized = normalize_rows(incr, options);
  const double factor = static_cast<double>(incr.p()) / static_cast<double>(normalized.kept);
  Matrix m = gram(normalized.rows);
  m *= factor;
  return make_output(std::move(m), EstimatorKind::SigmaTilde, normalized.kept, incr);
}

EstimatorOutput tvarcv(const IncrementMatrix& incr, const EstimatorOptions& options) {
  EstimatorOutput tilde = sigma_tilde(incr, options);
  const double scale = realized_trace(incr) / static_cast<double>(incr.p());
  Matrix m = tilde.matrix.matrix() * scale;
  return make_output(std::move(m), EstimatorKind::TVARCV, tilde.n, incr);
}

CovMatrix normalized_icv(const CovMatrix& icv) {
  const double trace = icv.trace();
  if (!(trace > 0.0)) throw Error(ErrorKind::ZeroTrace, "ICV trace must be positive");
  return icv.scaled(static_cast<double>(icv.dim()) / trace);
}

TraceReport trace_diagnostic(const IncrementMatrix& incr, double theta, double tolerance) {
  if (!(theta > 0.0)) throw Error(ErrorKind::OutOfDomain, "theta must be positive");
  const double ratio = realized_trace(incr) / static_cast<double>(incr.p());
  const double deviation = std::abs(ratio - theta) / theta;
  return {ratio, theta, deviation, tolerance, deviation <= tolerance};
}

}  // namespace specrcv
