#include "specrcv/mpsolve.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "fixed_point.hpp"
#include "specrcv/error.hpp"

namespace specrcv {

namespace {

using detail::damped_fixed_point;
using detail::FixedPointOutcome;
using detail::MapValue;
using detail::relative_gap;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string describe_point(Complex z) {
  std::ostringstream out;
  out.precision(17);
  out << "z=(" << z.real() << "," << z.imag() << ")";
  return out.str();
}

void require_upper_half_plane(Complex z) {
  if (!(z.imag() > 0.0) || !std::isfinite(z.real()) || !std::isfinite(z.imag())) {
    throw Error(ErrorKind::BadGrid, "solver needs finite z with Im z > 0, got " + describe_point(z));
  }
}

void require_ratio(double y) {
  if (!(y > 0.0) || !std::isfinite(y)) throw Error(ErrorKind::BadSpec, "ratio y must be positive");
}

/// G(m) = int dH(tau) / (tau (1 - y (1 + z m)) - z) and its derivative.
struct ClassicalMap {
  const PopulationSpectrum& h;
  double y;
  Complex z;

  MapValue operator()(Complex m) const {
    Complex g = 0.0;
    Complex dg = 0.0;
    const Complex shift = 1.0 - y * (1.0 + z * m);
    for (const SpectrumAtom& atom : h.atoms()) {
      const Complex inv = 1.0 / (atom.location * shift - z);
      g += atom.weight * inv;
      dg += atom.weight * atom.location * y * z * inv * inv;
    }
    return {g, dg};
  }
};

/// Companion map on the transform of the law of the n x n Gram matrix,
/// mu = -(1 - y)/z + y m:  mu -> -1 / (z - y int tau dH / (1 + tau mu)).
/// It sends the upper half plane into itself, so it cannot drift onto the
/// conjugate root that the plain iteration sometimes finds when y > 1.
struct CompanionMap {
  const PopulationSpectrum& h;
  double y;
  Complex z;

  MapValue operator()(Complex mu) const {
    Complex sum = 0.0;
    Complex dsum = 0.0;
    for (const SpectrumAtom& atom : h.atoms()) {
      const Complex inv = 1.0 / (1.0 + atom.location * mu);
      sum += atom.weight * atom.location * inv;
      dsum += atom.weight * atom.location * atom.location * inv * inv;
    }
    const Complex g = -1.0 / (z - y * sum);
    return {g, y * dsum * g * g};
  }
};

/// M(m~) from the s-integral, and its derivative in m~.
struct WeightedFirst {
  const WeightProfile& w;
  double y;
  Complex z;

  MapValue operator()(Complex m_tilde) const {
    Complex sum = 0.0;
    Complex dsum = 0.0;
    for (const auto& [ds, ws] : w.quadrature()) {
      const Complex inv = 1.0 / (1.0 + y * m_tilde * ws);
      sum += ds * ws * inv;
      dsum += ds * y * ws * ws * inv * inv;
    }
    return {-sum / z, dsum / z};
  }
};

/// m~(M) from the H-integral, and its derivative in M.
struct WeightedSecond {
  const PopulationSpectrum& h;
  Complex z;

  MapValue operator()(Complex M) const {
    Complex sum = 0.0;
    Complex dsum = 0.0;
    for (const SpectrumAtom& atom : h.atoms()) {
      const Complex inv = 1.0 / (atom.location * M + 1.0);
      sum += atom.weight * atom.location * inv;
      dsum += atom.weight * atom.location * atom.location * inv * inv;
    }
    return {-sum / z, dsum / z};
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// PopulationSpectrum

PopulationSpectrum::PopulationSpectrum(std::vector<SpectrumAtom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw Error(ErrorKind::BadSpec, "population spectrum needs atoms");
  double total = 0.0;
  for (const SpectrumAtom& atom : atoms_) {
    if (!std::isfinite(atom.location) || !std::isfinite(atom.weight)) {
      throw Error(ErrorKind::BadSpec, "population spectrum has non-finite values");
    }
    if (atom.location < 0.0) throw Error(ErrorKind::BadSpec, "atom locations must be >= 0");
    if (!(atom.weight > 0.0)) throw Error(ErrorKind::BadSpec, "atom weights must be positive");
    total += atom.weight;
  }
  std::stable_sort(atoms_.begin(), atoms_.end(),
                   [](const SpectrumAtom& a, const SpectrumAtom& b) { return a.location < b.location; });
  for (SpectrumAtom& atom : atoms_) atom.weight /= total;
}

PopulationSpectrum PopulationSpectrum::delta(double location) {
  return PopulationSpectrum({{location, 1.0}});
}

PopulationSpectrum PopulationSpectrum::from_esd(const SpectralDistribution& esd) {
  std::vector<SpectrumAtom> atoms;
  const double unit = 1.0 / static_cast<double>(esd.dim());
  for (double v : esd.eigenvalues()) {
    const double location = std::max(v, 0.0);
    if (!atoms.empty() && atoms.back().location == location) {
      atoms.back().weight += unit;
    } else {
      atoms.push_back({location, unit});
    }
  }
  return PopulationSpectrum(std::move(atoms));
}

double PopulationSpectrum::mean() const {
  double sum = 0.0;
  for (const SpectrumAtom& atom : atoms_) sum += atom.weight * atom.location;
  return sum;
}

PopulationSpectrum PopulationSpectrum::dilated(double factor) const {
  if (!(factor >= 0.0)) throw Error(ErrorKind::BadSpec, "dilation factor must be >= 0");
  std::vector<SpectrumAtom> atoms = atoms_;
  for (SpectrumAtom& atom : atoms) atom.location *= factor;
  return PopulationSpectrum(std::move(atoms));
}

double PopulationSpectrum::mass_between(double lo, double hi) const {
  double mass = 0.0;
  for (const SpectrumAtom& atom : atoms_) {
    if (atom.location >= lo && atom.location <= hi) mass += atom.weight;
  }
  return mass;
}

// ---------------------------------------------------------------------------
// WeightProfile

WeightProfile::WeightProfile(Representation rep) : rep_(std::move(rep)) {
  std::visit(Overloaded{
                 [&](const std::vector<WeightStep>& steps) {
                   for (const WeightStep& step : steps) {
                     nodes_.emplace_back(step.end - step.start, step.value);
                   }
                 },
                 [&](const SampledWeights& sampled) {
                   const std::size_t segments = sampled.values.size() - 1;
                   std::size_t per_segment = (256 + segments - 1) / segments;
                   // An even count keeps every Simpson pair inside one linear piece.
                   if (per_segment % 2 != 0) ++per_segment;
                   const std::size_t panels = segments * per_segment;
                   const double h = 1.0 / static_cast<double>(panels);
                   for (std::size_t i = 0; i <= panels; ++i) {
                     double coeff = (i == 0 || i == panels) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
                     nodes_.emplace_back(coeff * h / 3.0, value(static_cast<double>(i) * h));
                   }
                 },
             },
             rep_);
}

WeightProfile WeightProfile::steps(std::vector<WeightStep> steps, double kappa) {
  if (steps.empty()) throw Error(ErrorKind::BadProfile, "step profile needs at least one step");
  if (steps.front().start != 0.0 || steps.back().end != 1.0) {
    throw Error(ErrorKind::BadProfile, "steps must cover [0, 1]");
  }
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const WeightStep& step = steps[i];
    if (!(step.end > step.start)) throw Error(ErrorKind::BadProfile, "empty or reversed step");
    if (i > 0 && step.start != steps[i - 1].end) {
      throw Error(ErrorKind::BadProfile, "steps must be contiguous");
    }
    if (!std::isfinite(step.value) || step.value < 0.0 || step.value > kappa) {
      throw Error(ErrorKind::BadProfile, "step values must lie in [0, kappa]");
    }
  }
  return WeightProfile(std::move(steps));
}

WeightProfile WeightProfile::sampled(std::vector<double> values, double kappa) {
  if (values.size() < 2) throw Error(ErrorKind::BadProfile, "sampled profile needs >= 2 values");
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0 || v > kappa) {
      throw Error(ErrorKind::BadProfile, "sampled values must lie in [0, kappa]");
    }
  }
  return WeightProfile(SampledWeights{std::move(values)});
}

WeightProfile WeightProfile::constant(double value) { return steps({{0.0, 1.0, value}}); }

double WeightProfile::value(double s) const {
  return std::visit(Overloaded{
                        [s](const std::vector<WeightStep>& steps) {
                          for (const WeightStep& step : steps) {
                            if (s < step.end) return step.value;
                          }
                          return steps.back().value;
                        },
                        [s](const SampledWeights& sampled) {
                          const std::size_t segments = sampled.values.size() - 1;
                          const double pos = std::clamp(s, 0.0, 1.0) * static_cast<double>(segments);
                          const std::size_t k = std::min(static_cast<std::size_t>(pos), segments - 1);
                          const double frac = pos - static_cast<double>(k);
                          return (1.0 - frac) * sampled.values[k] + frac * sampled.values[k + 1];
                        },
                    },
                    rep_);
}

double WeightProfile::mean() const {
  double sum = 0.0;
  for (const auto& [ds, ws] : nodes_) sum += ds * ws;
  return sum;
}

double WeightProfile::max_value() const {
  double largest = 0.0;
  for (const auto& node : nodes_) largest = std::max(largest, node.second);
  return largest;
}

Complex WeightProfile::integrate(const std::function<Complex(double)>& f) const {
  Complex sum = 0.0;
  for (const auto& [ds, ws] : nodes_) sum += ds * f(ws);
  return sum;
}

// ---------------------------------------------------------------------------
// Closed-form Marcenko-Pastur law

namespace {

constexpr std::size_t kAngleSteps = 4096;

void require_law_params(const MPLawParams& params) {
  if (!(params.y > 0.0) || !std::isfinite(params.y) || !(params.sigma2 > 0.0) ||
      !std::isfinite(params.sigma2)) {
    throw Error(ErrorKind::BadSpec, "MP law needs y > 0 and sigma2 > 0");
  }
}

}  // namespace

std::pair<double, double> mp_support(const MPLawParams& params) {
  require_law_params(params);
  const double r = std::sqrt(params.y);
  return {params.sigma2 * (1.0 - r) * (1.0 - r), params.sigma2 * (1.0 + r) * (1.0 + r)};
}

double mp_density(const MPLawParams& params, double x) {
  const auto [a, b] = mp_support(params);
  if (!(x > 0.0) || x < a || x > b) return 0.0;
  return std::sqrt((b - x) * (x - a)) / (2.0 * std::numbers::pi * params.sigma2 * x * params.y);
}

double mp_point_mass(const MPLawParams& params) {
  require_law_params(params);
  return params.y > 1.0 ? 1.0 - 1.0 / params.y : 0.0;
}

MarchenkoPasturLaw::MarchenkoPasturLaw(MPLawParams params) : params_(params) {
  std::tie(a_, b_) = mp_support(params_);
  const double h = std::numbers::pi / static_cast<double>(kAngleSteps);
  theta_cumulative_.assign(kAngleSteps + 1, 0.0);
  for (std::size_t k = 0; k < kAngleSteps; ++k) {
    const double t0 = static_cast<double>(k) * h;
    theta_cumulative_[k + 1] =
        theta_cumulative_[k] + h / 6.0 *
                                   (angle_integrand(t0) + 4.0 * angle_integrand(t0 + 0.5 * h) +
                                    angle_integrand(t0 + h));
  }
  // The continuous part carries mass min(1, 1/y) exactly; rescale away the
  // quadrature error so the CDF reaches 1.
  const double target = 1.0 - point_mass();
  const double total = theta_cumulative_.back();
  for (double& c : theta_cumulative_) c *= target / total;
}

// x(theta) = a + half (1 - cos theta) removes both square-root edges:
// density * dx/dtheta = half^2 sin^2 theta / (2 pi sigma^2 y x).
double MarchenkoPasturLaw::angle_integrand(double theta) const {
  const double half = 0.5 * (b_ - a_);
  const double norm = 2.0 * std::numbers::pi * params_.sigma2 * params_.y;
  if (a_ == 0.0) return half * (1.0 + std::cos(theta)) / norm;  // sin^2 / (1 - cos) = 1 + cos
  const double s = std::sin(theta);
  return half * half * s * s / (norm * (a_ + half * (1.0 - std::cos(theta))));
}

double MarchenkoPasturLaw::point_mass() const noexcept {
  return params_.y > 1.0 ? 1.0 - 1.0 / params_.y : 0.0;
}

double MarchenkoPasturLaw::density(double x) const { return mp_density(params_, x); }

double MarchenkoPasturLaw::continuous_cdf(double x) const {
  if (x <= a_) return 0.0;
  if (x >= b_) return theta_cumulative_.back();
  const double half = 0.5 * (b_ - a_);
  const double theta = std::acos(std::clamp(1.0 - (x - a_) / half, -1.0, 1.0));
  const double h = std::numbers::pi / static_cast<double>(kAngleSteps);
  const std::size_t k = std::min(static_cast<std::size_t>(theta / h), kAngleSteps - 1);
  const double t0 = static_cast<double>(k) * h;
  const double d = theta - t0;
  return theta_cumulative_[k] + d / 6.0 *
                                    (angle_integrand(t0) + 4.0 * angle_integrand(t0 + 0.5 * d) +
                                     angle_integrand(theta));
}

double MarchenkoPasturLaw::cdf(double x) const {
  return std::min(1.0, continuous_cdf(x) + (x >= 0.0 ? point_mass() : 0.0));
}

double MarchenkoPasturLaw::cdf_left(double x) const {
  return std::min(1.0, continuous_cdf(x) + (x > 0.0 ? point_mass() : 0.0));
}

std::vector<double> MarchenkoPasturLaw::breakpoints() const {
  std::vector<double> points{a_, b_};
  if (point_mass() > 0.0) points.push_back(0.0);
  return points;
}

// ---------------------------------------------------------------------------
// Classical equation

double mp_residual(const PopulationSpectrum& h, double y, Complex z, Complex m) {
  return relative_gap(m, ClassicalMap{h, y, z}(m).g);
}

namespace {

// The equation can have several roots in the upper half plane when y > 1. The
// Stieltjes transform is the one whose companion -(1 - y) / z + y m is also a
// Stieltjes transform.
bool admissible_root(Complex m, double y, Complex z) {
  return m.imag() > 0.0 && (-(1.0 - y) / z + y * m).imag() >= 0.0;
}

}  // namespace

MPSolveResult solve_mp(const PopulationSpectrum& h, double y, Complex z,
                       const SolverOptions& options, std::optional<Complex> initial) {
  require_upper_half_plane(z);
  require_ratio(y);
  const ClassicalMap map{h, y, z};
  FixedPointOutcome outcome = damped_fixed_point(map, initial.value_or(-1.0 / z), options);
  if (!outcome.converged || !admissible_root(outcome.x, y, z)) {
    // Retry through the companion transform, then polish on the original map
    // so the reported residual refers to the defining equation.
    const CompanionMap companion{h, y, z};
    const FixedPointOutcome mu = damped_fixed_point(companion, -1.0 / z, options);
    if (mu.converged) {
      const Complex start = (mu.x + (1.0 - y) / z) / y;
      FixedPointOutcome polished = damped_fixed_point(map, start, options);
      polished.iterations += outcome.iterations + mu.iterations;
      if (polished.converged && admissible_root(polished.x, y, z)) {
        outcome = polished;
      } else {
        outcome.converged = false;
      }
    } else {
      outcome.converged = false;
    }
  }
  if (!outcome.converged || !admissible_root(outcome.x, y, z)) {
    throw NoConvergenceError(outcome.iterations, outcome.residual, "solve_mp at " + describe_point(z));
  }
  return {outcome.x, outcome.residual, outcome.iterations};
}

// ---------------------------------------------------------------------------
// Weighted system

bool WeightedSolveResult::in_first_quadrant(double slack) const noexcept {
  return M.real() >= -slack && M.imag() >= -slack && m_tilde.real() >= -slack &&
         m_tilde.imag() >= -slack;
}

double weighted_residual(const PopulationSpectrum& h, const WeightProfile& w, double y, Complex z,
                         Complex M, Complex m_tilde) {
  const Complex M_image = WeightedFirst{w, y, z}(m_tilde).g;
  const Complex m_tilde_image = WeightedSecond{h, z}(M).g;
  return std::max(relative_gap(M, M_image), relative_gap(m_tilde, m_tilde_image));
}

WeightedSolveResult solve_weighted_mp(const PopulationSpectrum& h, const WeightProfile& w,
                                      double y, Complex z, const SolverOptions& options,
                                      std::optional<Complex> initial) {
  require_upper_half_plane(z);
  require_ratio(y);
  const WeightedFirst first{w, y, z};
  const WeightedSecond second{h, z};

  // Compose the pair into one map on m~: T(m~) = second(first(m~)).
  auto composed = [&](Complex m_tilde) {
    const MapValue M = first(m_tilde);
    const MapValue next = second(M.g);
    return MapValue{next.g, next.dg * M.dg};
  };

  const Complex start = initial.value_or(-h.mean() / z);
  FixedPointOutcome outcome = damped_fixed_point(composed, start, options);
  // H = delta_0 makes m~ = 0 exactly, which the upper-half-plane guard in the
  // Newton step never reaches; accept it as the boundary solution.
  const bool degenerate = h.max_location() == 0.0;
  if (!outcome.converged || (!degenerate && !(outcome.x.imag() > 0.0))) {
    throw NoConvergenceError(outcome.iterations, outcome.residual,
                             "solve_weighted_mp at " + describe_point(z));
  }

  WeightedSolveResult result;
  result.z = z;
  result.m_tilde = outcome.x;
  result.M = first(outcome.x).g;
  Complex sum = 0.0;
  for (const SpectrumAtom& atom : h.atoms()) sum += atom.weight / (atom.location * result.M + 1.0);
  result.m_Fw = -sum / z;
  result.residual = weighted_residual(h, w, y, z, result.M, result.m_tilde);
  result.iterations = outcome.iterations;
  return result;
}

WeightProfile weight_profile_from_model(const VolatilityProfile& profile,
                                        const TimeChange& timechange) {
  constexpr std::size_t kSamples = 1025;
  return std::visit(
      Overloaded{
          [&](const IdentityTimeChange&) {
            return std::visit(
                Overloaded{
                    [](const ConstantVolatility& c) {
                      return WeightProfile::constant(c.sigma * c.sigma);
                    },
                    [](const PiecewiseVolatility& pw) {
                      std::vector<WeightStep> steps;
                      for (std::size_t i = 0; i < pw.gammas.size(); ++i) {
                        steps.push_back({pw.breaks[i], pw.breaks[i + 1], pw.gammas[i] * pw.gammas[i]});
                      }
                      return WeightProfile::steps(std::move(steps));
                    },
                    [&](const auto&) {
                      std::vector<double> values(kSamples);
                      for (std::size_t i = 0; i < kSamples; ++i) {
                        values[i] = profile.gamma_sq(static_cast<double>(i) /
                                                     static_cast<double>(kSamples - 1));
                      }
                      return WeightProfile::sampled(std::move(values));
                    },
                },
                profile.kind());
          },
          [&](const SampledTimeChange& tc) {
            const auto& upsilon = tc.upsilon;
            if (upsilon.size() < 2) {
              throw Error(ErrorKind::BadProfile, "time-change density needs >= 2 samples");
            }
            for (double u : upsilon) {
              if (!std::isfinite(u) || u < 0.0) {
                throw Error(ErrorKind::BadProfile, "time-change density must be >= 0");
              }
            }
            const double ds = 1.0 / static_cast<double>(upsilon.size() - 1);
            std::vector<double> big_upsilon(upsilon.size(), 0.0);
            for (std::size_t i = 1; i < upsilon.size(); ++i) {
              big_upsilon[i] = big_upsilon[i - 1] + 0.5 * (upsilon[i] + upsilon[i - 1]) * ds;
            }
            const double total = big_upsilon.back();
            if (!(total > 0.0)) throw Error(ErrorKind::BadProfile, "time-change density integrates to 0");
            std::vector<double> values(upsilon.size());
            for (std::size_t i = 0; i < upsilon.size(); ++i) {
              const double s = std::clamp(big_upsilon[i] / total, 0.0, 1.0);
              values[i] = profile.gamma_sq(s) * upsilon[i] / total;
            }
            return WeightProfile::sampled(std::move(values));
          },
      },
      timechange);
}

// ---------------------------------------------------------------------------
// Inversion

DensityCurve invert_stieltjes(const StieltjesFunction& m, std::span<const double> xs, double v) {
  if (!(v > 0.0)) throw Error(ErrorKind::BadGrid, "inversion bandwidth must be positive");
  std::vector<double> ys(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    ys[k] = std::max(0.0, m(Complex(xs[k], v)).imag() / std::numbers::pi);
  }
  std::vector<double> grid(xs.begin(), xs.end());
  DensityCurve curve(std::move(grid), ys, 0.0);
  const double mass = std::max(0.0, 1.0 - curve.integral());
  return DensityCurve(std::vector<double>(xs.begin(), xs.end()), std::move(ys), mass);
}

DensityCurve invert_stieltjes(const StieltjesGrid& grid) {
  if (grid.zs.empty() || grid.zs.size() != grid.ms.size()) {
    throw Error(ErrorKind::BadGrid, "Stieltjes grid needs matching nonempty zs and ms");
  }
  const double v = grid.zs.front().imag();
  std::vector<double> xs(grid.zs.size());
  for (std::size_t k = 0; k < grid.zs.size(); ++k) {
    if (std::abs(grid.zs[k].imag() - v) > 1e-12 * std::abs(v)) {
      throw Error(ErrorKind::BadGrid, "Stieltjes grid must lie on one horizontal line");
    }
    xs[k] = grid.zs[k].real();
  }
  std::size_t k = 0;
  return invert_stieltjes([&](Complex) { return grid.ms[k++]; }, xs, v);
}

double default_bandwidth(double lo, double hi) {
  const double width = hi - lo;
  if (width > 0.0) return 1e-3 * width;
  const double scale = std::max(std::abs(lo), std::abs(hi));
  return scale > 0.0 ? 1e-3 * scale : 1e-3;
}

std::vector<double> linspace(double lo, double hi, std::size_t points) {
  if (points == 0) return {};
  if (points == 1) return {lo};
  std::vector<double> xs(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t k = 0; k < points; ++k) xs[k] = lo + static_cast<double>(k) * step;
  xs.back() = hi;
  return xs;
}

StieltjesGrid solve_mp_on_line(const PopulationSpectrum& h, double y, std::span<const double> xs,
                               double v, const SolverOptions& options) {
  StieltjesGrid grid;
  std::optional<Complex> previous;
  for (double x : xs) {
    const Complex z(x, v);
    MPSolveResult result{};
    try {
      result = solve_mp(h, y, z, options, previous);
    } catch (const NoConvergenceError&) {
      if (!previous) throw;
      result = solve_mp(h, y, z, options);
    }
    previous = result.m;
    grid.zs.push_back(z);
    grid.ms.push_back(result.m);
  }
  return grid;
}

std::vector<WeightedSolveResult> solve_weighted_mp_on_line(const PopulationSpectrum& h,
                                                           const WeightProfile& w, double y,
                                                           std::span<const double> xs, double v,
                                                           const SolverOptions& options) {
  std::vector<WeightedSolveResult> results;
  results.reserve(xs.size());
  std::optional<Complex> previous;
  for (double x : xs) {
    const Complex z(x, v);
    WeightedSolveResult result{};
    try {
      result = solve_weighted_mp(h, w, y, z, options, previous);
    } catch (const NoConvergenceError&) {
      if (!previous) throw;
      result = solve_weighted_mp(h, w, y, z, options);
    }
    previous = result.m_tilde;
    results.push_back(result);
  }
  return results;
}

StieltjesGrid to_stieltjes_grid(std::span<const WeightedSolveResult> results) {
  StieltjesGrid grid;
  for (const WeightedSolveResult& r : results) {
    grid.zs.push_back(r.z);
    grid.ms.push_back(r.m_Fw);
  }
  return grid;
}

}  // namespace specrcv
