#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace specrcv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Symmetric p x p matrix. The constructor stores (A + A^T) / 2, so entry (i, j)
/// and entry (j, i) are always bitwise equal.
class CovMatrix {
 public:
  explicit CovMatrix(Matrix entries);

  static CovMatrix identity(std::size_t p);
  static CovMatrix zero(std::size_t p);
  static CovMatrix diagonal(std::span<const double> values);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
  const Matrix& matrix() const noexcept { return entries_; }
  double operator()(std::size_t i, std::size_t j) const {
    return entries_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  double trace() const { return entries_.trace(); }
  double frobenius_norm() const { return entries_.norm(); }
  bool all_finite() const { return entries_.allFinite(); }

  CovMatrix scaled(double factor) const;

 private:
  Matrix entries_;
};

struct EigenDecomposition {
  Vector values;   // ascending
  Matrix vectors;  // column k pairs with values[k]
};

/// Empirical spectral distribution: the uniform law on a matrix's eigenvalues.
class SpectralDistribution {
 public:
  /// Sorts the input. Throws BadSpec when empty and NonFinite on NaN/Inf.
  explicit SpectralDistribution(std::vector<double> eigenvalues);

  std::size_t dim() const noexcept { return eigenvalues_.size(); }
  std::span<const double> eigenvalues() const noexcept { return eigenvalues_; }

  /// F(x) = #{j : lambda_j <= x} / p.
  double cdf(double x) const;
  /// F(x-) = #{j : lambda_j < x} / p.
  double cdf_left(double x) const;
  /// Smallest atom lambda with F(lambda) >= q.
  double quantile(double q) const;

  std::span<const double> breakpoints() const noexcept { return eigenvalues_; }

  double min() const noexcept { return eigenvalues_.front(); }
  double max() const noexcept { return eigenvalues_.back(); }
  double mean() const;
  double max_abs() const noexcept;

  /// Fraction of atoms with |lambda| < rel_tol * max|lambda|.
  double mass_at_zero(double rel_tol = 1e-12) const;

 private:
  std::vector<double> eigenvalues_;
};

EigenDecomposition eig_sym(const CovMatrix& a);

/// Nonnegative square root. Eigenvalues in [-1e-8 * ||A||, 0) are clamped to
/// zero; anything more negative throws NotPSD.
CovMatrix sqrt_psd(const CovMatrix& a);

SpectralDistribution esd(const CovMatrix& a);

/// Smallest eigenvalue, for PSD checks.
double min_eigenvalue(const CovMatrix& a);

}  // namespace specrcv
