#include "specrcv/covmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "specrcv/error.hpp"

namespace specrcv {

CovMatrix::CovMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() == 0) {
    throw Error(ErrorKind::BadSpec, "covariance matrix must be square and nonempty, got " +
                                        std::to_string(entries_.rows()) + "x" +
                                        std::to_string(entries_.cols()));
  }
  const Eigen::Index p = entries_.rows();
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = j + 1; i < p; ++i) {
      const double avg = 0.5 * (entries_(i, j) + entries_(j, i));
      entries_(i, j) = avg;
      entries_(j, i) = avg;
    }
  }
}

CovMatrix CovMatrix::identity(std::size_t p) {
  const auto n = static_cast<Eigen::Index>(p);
  return CovMatrix(Matrix::Identity(n, n));
}

CovMatrix CovMatrix::zero(std::size_t p) {
  const auto n = static_cast<Eigen::Index>(p);
  return CovMatrix(Matrix::Zero(n, n));
}

CovMatrix CovMatrix::diagonal(std::span<const double> values) {
  Vector d(static_cast<Eigen::Index>(values.size()));
  std::copy(values.begin(), values.end(), d.data());
  return CovMatrix(d.asDiagonal().toDenseMatrix());
}

CovMatrix CovMatrix::scaled(double factor) const { return CovMatrix(entries_ * factor); }

SpectralDistribution::SpectralDistribution(std::vector<double> eigenvalues)
    : eigenvalues_(std::move(eigenvalues)) {
  if (eigenvalues_.empty()) throw Error(ErrorKind::BadSpec, "spectral distribution needs atoms");
  for (double v : eigenvalues_) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "non-finite eigenvalue");
  }
  std::sort(eigenvalues_.begin(), eigenvalues_.end());
}

double SpectralDistribution::cdf(double x) const {
  const auto it = std::upper_bound(eigenvalues_.begin(), eigenvalues_.end(), x);
  return static_cast<double>(it - eigenvalues_.begin()) / static_cast<double>(dim());
}

double SpectralDistribution::cdf_left(double x) const {
  const auto it = std::lower_bound(eigenvalues_.begin(), eigenvalues_.end(), x);
  return static_cast<double>(it - eigenvalues_.begin()) / static_cast<double>(dim());
}

double SpectralDistribution::quantile(double q) const {
  q = std::clamp(q, 0.0, 1.0);
  const auto p = static_cast<double>(dim());
  auto k = static_cast<std::size_t>(std::ceil(q * p - 1e-12));
  k = std::clamp<std::size_t>(k, 1, dim());
  return eigenvalues_[k - 1];
}

double SpectralDistribution::mean() const {
  return std::accumulate(eigenvalues_.begin(), eigenvalues_.end(), 0.0) /
         static_cast<double>(dim());
}

double SpectralDistribution::max_abs() const noexcept {
  return std::max(std::abs(eigenvalues_.front()), std::abs(eigenvalues_.back()));
}

double SpectralDistribution::mass_at_zero(double rel_tol) const {
  const double threshold = rel_tol * max_abs();
  const auto count = std::count_if(eigenvalues_.begin(), eigenvalues_.end(),
                                   [&](double v) { return std::abs(v) <= threshold; });
  return static_cast<double>(count) / static_cast<double>(dim());
}

namespace {

void require_finite(const CovMatrix& a) {
  if (!a.all_finite()) throw Error(ErrorKind::NonFinite, "matrix has NaN or Inf entries");
}

}  // namespace

EigenDecomposition eig_sym(const CovMatrix& a) {
  require_finite(a);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.matrix(), Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NoConvergence, "symmetric eigensolver failed");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

CovMatrix sqrt_psd(const CovMatrix& a) {
  EigenDecomposition eig = eig_sym(a);
  const double scale = std::max(std::abs(eig.values.minCoeff()), std::abs(eig.values.maxCoeff()));
  const double min_value = eig.values.minCoeff();
  if (min_value < -1e-8 * scale) {
    throw Error(ErrorKind::NotPSD, "minimum eigenvalue " + std::to_string(min_value) +
                                       " below tolerance");
  }
  Vector roots = eig.values.cwiseMax(0.0).cwiseSqrt();
  return CovMatrix(eig.vectors * roots.asDiagonal() * eig.vectors.transpose());
}

SpectralDistribution esd(const CovMatrix& a) {
  require_finite(a);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NoConvergence, "symmetric eigensolver failed");
  }
  const Vector& values = solver.eigenvalues();
  return SpectralDistribution(std::vector<double>(values.data(), values.data() + values.size()));
}

double min_eigenvalue(const CovMatrix& a) { return esd(a).min(); }

}  // namespace specrcv
