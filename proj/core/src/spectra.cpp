#include "specrcv/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "specrcv/error.hpp"

namespace specrcv {

DensityCurve::DensityCurve(std::vector<double> xs, std::vector<double> ys, double mass_at_zero)
    : xs_(std::move(xs)), ys_(std::move(ys)), mass_at_zero_(mass_at_zero) {
  if (xs_.empty() || xs_.size() != ys_.size()) {
    throw Error(ErrorKind::BadSpec, "density curve needs matching nonempty xs and ys");
  }
  if (!(mass_at_zero_ >= 0.0 && mass_at_zero_ <= 1.0)) {
    throw Error(ErrorKind::BadSpec, "mass_at_zero must lie in [0, 1]");
  }
  for (std::size_t k = 0; k < xs_.size(); ++k) {
    if (!std::isfinite(xs_[k]) || !std::isfinite(ys_[k])) {
      throw Error(ErrorKind::NonFinite, "density curve has non-finite values");
    }
    if (ys_[k] < 0.0) throw Error(ErrorKind::BadSpec, "density values must be nonnegative");
    if (k > 0 && !(xs_[k] > xs_[k - 1])) {
      throw Error(ErrorKind::BadSpec, "density grid must be strictly increasing");
    }
  }
  cumulative_.assign(xs_.size(), 0.0);
  for (std::size_t k = 1; k < xs_.size(); ++k) {
    cumulative_[k] = cumulative_[k - 1] + 0.5 * (ys_[k] + ys_[k - 1]) * (xs_[k] - xs_[k - 1]);
  }
}

double DensityCurve::continuous_cdf(double x) const {
  if (x <= xs_.front()) return 0.0;
  if (x >= xs_.back()) return cumulative_.back();
  const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  const auto k = static_cast<std::size_t>(it - xs_.begin()) - 1;
  const double frac = (x - xs_[k]) / (xs_[k + 1] - xs_[k]);
  return cumulative_[k] + frac * (cumulative_[k + 1] - cumulative_[k]);
}

double DensityCurve::cdf(double x) const {
  return continuous_cdf(x) + (x >= 0.0 ? mass_at_zero_ : 0.0);
}

double DensityCurve::cdf_left(double x) const {
  return continuous_cdf(x) + (x > 0.0 ? mass_at_zero_ : 0.0);
}

std::vector<double> DensityCurve::breakpoints() const {
  std::vector<double> points = xs_;
  if (mass_at_zero_ > 0.0) points.push_back(0.0);
  return points;
}

Complex empirical_stieltjes(const SpectralDistribution& f, Complex z) {
  if (!(z.imag() > 0.0)) throw Error(ErrorKind::BadGrid, "Stieltjes transform needs Im z > 0");
  Complex sum = 0.0;
  for (double lambda : f.eigenvalues()) sum += 1.0 / (lambda - z);
  return sum / static_cast<double>(f.dim());
}

StieltjesGrid empirical_stieltjes(const SpectralDistribution& f, std::span<const Complex> zs) {
  for (const Complex& z : zs) {
    if (!(z.imag() > 0.0)) throw Error(ErrorKind::BadGrid, "Stieltjes transform needs Im z > 0");
  }
  StieltjesGrid grid;
  grid.zs.assign(zs.begin(), zs.end());
  grid.ms.reserve(zs.size());
  for (const Complex& z : zs) grid.ms.push_back(empirical_stieltjes(f, z));
  return grid;
}

namespace {

/// Quantile with linear interpolation between order statistics.
double interpolated_quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto k = static_cast<std::size_t>(pos);
  if (k + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(k);
  return (1.0 - frac) * sorted[k] + frac * sorted[k + 1];
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

DensityCurve histogram(const SpectralDistribution& f, const BinPolicy& policy) {
  const double threshold = 1e-12 * f.max_abs();
  std::vector<double> atoms;
  atoms.reserve(f.dim());
  for (double v : f.eigenvalues()) {
    if (std::abs(v) > threshold) atoms.push_back(v);
  }
  const double p = static_cast<double>(f.dim());
  const double zero_mass = static_cast<double>(f.dim() - atoms.size()) / p;
  if (atoms.empty()) return DensityCurve({0.0}, {0.0}, 1.0);

  const double lo = atoms.front();
  const double hi = atoms.back();
  const double range = hi - lo;
  // Spreads below 1e-9 relative are treated as a single value.
  const bool spread = range > 1e-9 * std::max(std::abs(lo), std::abs(hi));

  std::size_t bins = 1;
  double width = 0.0;
  if (spread) {
    bins = std::visit(
        Overloaded{
            [&](const FreedmanDiaconisBins& fd) {
              const double iqr =
                  interpolated_quantile(atoms, 0.75) - interpolated_quantile(atoms, 0.25);
              const double h = 2.0 * iqr / std::cbrt(static_cast<double>(atoms.size()));
              std::size_t count = fd.min_bins;
              if (h > 0.0) count = std::max(count, static_cast<std::size_t>(std::ceil(range / h)));
              return std::clamp<std::size_t>(count, 1, 100000);
            },
            [](const FixedBins& fixed) { return std::max<std::size_t>(fixed.bins, 1); },
        },
        policy);
    width = range / static_cast<double>(bins);
  } else {
    width = 1e-3 * std::abs(lo);
  }

  std::vector<double> counts(bins, 0.0);
  for (double v : atoms) {
    std::size_t k = 0;
    if (spread) {
      k = std::min(static_cast<std::size_t>((v - lo) / width), bins - 1);
    }
    counts[k] += 1.0;
  }

  const double first_centre = spread ? lo + 0.5 * width : lo;
  std::vector<double> xs;
  std::vector<double> ys;
  xs.reserve(bins + 2);
  ys.reserve(bins + 2);
  xs.push_back(first_centre - width);
  ys.push_back(0.0);
  for (std::size_t k = 0; k < bins; ++k) {
    xs.push_back(first_centre + static_cast<double>(k) * width);
    ys.push_back(counts[k] / (p * width));
  }
  xs.push_back(xs.back() + width);
  ys.push_back(0.0);
  return DensityCurve(std::move(xs), std::move(ys), zero_mass);
}

}  // namespace specrcv
