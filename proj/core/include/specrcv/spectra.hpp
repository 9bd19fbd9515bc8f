#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "specrcv/covmodel.hpp"

namespace specrcv {

using Complex = std::complex<double>;

/// Density sampled on an increasing grid, plus an atom at the origin.
///
/// The CDF is the linear interpolation of the cumulative trapezoid integral
/// between grid nodes, plus mass_at_zero for x >= 0. Below xs.front() the
/// continuous part is 0; above xs.back() it is the full trapezoid integral.
class DensityCurve {
 public:
  DensityCurve(std::vector<double> xs, std::vector<double> ys, double mass_at_zero = 0.0);

  std::span<const double> xs() const noexcept { return xs_; }
  std::span<const double> ys() const noexcept { return ys_; }
  double mass_at_zero() const noexcept { return mass_at_zero_; }

  /// Trapezoid integral of ys over xs.
  double integral() const noexcept { return cumulative_.back(); }
  double total_mass() const noexcept { return integral() + mass_at_zero_; }

  double cdf(double x) const;
  double cdf_left(double x) const;
  std::vector<double> breakpoints() const;

 private:
  double continuous_cdf(double x) const;

  std::vector<double> xs_;
  std::vector<double> ys_;
  std::vector<double> cumulative_;
  double mass_at_zero_;
};

/// Anything with right/left CDF limits and a finite set of points outside of
/// which |F - G| is monotone between neighbours.
template <class T>
concept CdfLike = requires(const T& f, double x) {
  { f.cdf(x) } -> std::convertible_to<double>;
  { f.cdf_left(x) } -> std::convertible_to<double>;
  f.breakpoints();
};

/// sup_x |F(x) - G(x)|, evaluated at both one-sided limits over the merged
/// breakpoints. Exact when between breakpoints one CDF is constant and the
/// other monotone, or both are linear.
template <CdfLike F, CdfLike G>
double kolmogorov_distance(const F& f, const G& g) {
  std::vector<double> points;
  for (double x : f.breakpoints()) points.push_back(x);
  for (double x : g.breakpoints()) points.push_back(x);
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  double sup = 0.0;
  for (double x : points) {
    sup = std::max(sup, std::abs(f.cdf(x) - g.cdf(x)));
    sup = std::max(sup, std::abs(f.cdf_left(x) - g.cdf_left(x)));
  }
  return std::min(sup, 1.0);
}

namespace detail {

/// Checks G(x) <= F(x + eps) + eps and F(x - eps) - eps <= G(x) for all x.
/// Between the candidate points both sides are linear or constant, so the
/// suprema are attained at candidates, possibly as left limits. F is
/// evaluated at its own breakpoints directly to avoid (a + eps) - eps rounding.
template <CdfLike F, CdfLike G>
bool levy_feasible(const F& f, const G& g, double eps) {
  for (double b : g.breakpoints()) {
    if (g.cdf(b) - f.cdf(b + eps) > eps) return false;
    if (g.cdf_left(b) - f.cdf_left(b + eps) > eps) return false;
    if (f.cdf(b - eps) - g.cdf(b) > eps) return false;
    if (f.cdf_left(b - eps) - g.cdf_left(b) > eps) return false;
  }
  for (double a : f.breakpoints()) {
    if (g.cdf(a - eps) - f.cdf(a) > eps) return false;
    if (g.cdf_left(a - eps) - f.cdf_left(a) > eps) return false;
    if (f.cdf(a) - g.cdf(a + eps) > eps) return false;
    if (f.cdf_left(a) - g.cdf_left(a + eps) > eps) return false;
  }
  return true;
}

}  // namespace detail

/// Levy distance inf{eps > 0 : F(x - eps) - eps <= G(x) <= F(x + eps) + eps for all x},
/// by bisection on eps to within `tolerance`.
template <CdfLike F, CdfLike G>
double levy_distance(const F& f, const G& g, double tolerance = 1e-6) {
  if (detail::levy_feasible(f, g, 0.0)) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (detail::levy_feasible(f, g, mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

/// Samples of a Stieltjes transform m(z) at points z in the upper half plane.
struct StieltjesGrid {
  std::vector<Complex> zs;
  std::vector<Complex> ms;
};

/// m(z) = (1/p) sum_j 1 / (lambda_j - z). Throws BadGrid when Im z <= 0.
Complex empirical_stieltjes(const SpectralDistribution& f, Complex z);
StieltjesGrid empirical_stieltjes(const SpectralDistribution& f, std::span<const Complex> zs);

struct FreedmanDiaconisBins {
  std::size_t min_bins = 20;
};
struct FixedBins {
  std::size_t bins;
};
using BinPolicy = std::variant<FreedmanDiaconisBins, FixedBins>;

/// Normalized histogram of the nonzero atoms. Atoms with |lambda| below
/// 1e-12 * max|lambda| go to mass_at_zero. Bins are reported at their centres,
/// padded with a zero-density node one bin width outside each end, so the
/// trapezoid integral equals the histogrammed mass exactly.
DensityCurve histogram(const SpectralDistribution& f, const BinPolicy& policy = FreedmanDiaconisBins{});

}  // namespace specrcv
