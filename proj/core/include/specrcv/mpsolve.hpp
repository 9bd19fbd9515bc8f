#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "specrcv/covmodel.hpp"
#include "specrcv/diffusion.hpp"
#include "specrcv/spectra.hpp"

namespace specrcv {

struct SpectrumAtom {
  double location;
  double weight;
};

/// Atomic probability distribution H on [0, inf).
class PopulationSpectrum {
 public:
  /// Sorts by location and rescales weights to sum to 1. Throws BadSpec on
  /// an empty list, a negative location, a nonpositive weight or non-finite input.
  explicit PopulationSpectrum(std::vector<SpectrumAtom> atoms);

  static PopulationSpectrum delta(double location);
  /// Uniform weights on the eigenvalues, with repeated values merged.
  static PopulationSpectrum from_esd(const SpectralDistribution& esd);

  std::span<const SpectrumAtom> atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }

  double mean() const;
  double max_location() const { return atoms_.back().location; }
  /// The law of c * tau.
  PopulationSpectrum dilated(double factor) const;
  /// H-mass in [lo, hi].
  double mass_between(double lo, double hi) const;

 private:
  std::vector<SpectrumAtom> atoms_;
};

struct WeightStep {
  double start;
  double end;
  double value;
};

/// w sampled at s_i = i / (m - 1), linearly interpolated.
struct SampledWeights {
  std::vector<double> values;
};

/// Nonnegative weight process w_s on [0, 1].
class WeightProfile {
 public:
  using Representation = std::variant<std::vector<WeightStep>, SampledWeights>;

  /// Steps must be contiguous and cover [0, 1]. Throws BadProfile on a gap,
  /// a negative value or a value above kappa.
  static WeightProfile steps(std::vector<WeightStep> steps,
                             double kappa = std::numeric_limits<double>::infinity());
  static WeightProfile sampled(std::vector<double> values,
                               double kappa = std::numeric_limits<double>::infinity());
  static WeightProfile constant(double value);

  const Representation& representation() const noexcept { return rep_; }

  double value(double s) const;
  double mean() const;
  double max_value() const;

  /// int_0^1 f(w_s) ds. Exact per step for step profiles; composite Simpson
  /// with at least 256 panels (linear interpolation between samples) otherwise.
  Complex integrate(const std::function<Complex(double)>& f) const;

  /// (quadrature weight, w value) pairs behind integrate().
  std::span<const std::pair<double, double>> quadrature() const noexcept { return nodes_; }

 private:
  explicit WeightProfile(Representation rep);
  Representation rep_;
  std::vector<std::pair<double, double>> nodes_;  // (ds, w) quadrature pairs
};

struct MPLawParams {
  double y;
  double sigma2;
};

/// Closed-form Marcenko-Pastur law MP(y, sigma^2).
class MarchenkoPasturLaw {
 public:
  explicit MarchenkoPasturLaw(MPLawParams params);

  const MPLawParams& params() const noexcept { return params_; }
  double lower_edge() const noexcept { return a_; }
  double upper_edge() const noexcept { return b_; }
  /// 1 - 1/y when y > 1, else 0.
  double point_mass() const noexcept;

  double density(double x) const;
  double cdf(double x) const;
  double cdf_left(double x) const;
  std::vector<double> breakpoints() const;

 private:
  double continuous_cdf(double x) const;
  double angle_integrand(double theta) const;

  MPLawParams params_;
  double a_;
  double b_;
  std::vector<double> theta_cumulative_;  // cumulative mass on a uniform angle grid
};

std::pair<double, double> mp_support(const MPLawParams& params);
double mp_density(const MPLawParams& params, double x);
double mp_point_mass(const MPLawParams& params);

struct SolverOptions {
  /// Bound on the relative residual |x - G(x)| / max(1, |x|).
  double tolerance = 1e-10;
  std::size_t max_iterations = 100000;
  /// Try a Newton step each iteration, kept only if it stays in the upper
  /// half plane and lowers the residual.
  bool newton = true;
  double min_damping = 1.0 / 16.0;
};

struct MPSolveResult {
  Complex m;
  double residual;
  std::size_t iterations;
};

/// Relative residual of m against the fixed-point equation
/// m = int dH(tau) / (tau (1 - y (1 + z m)) - z).
double mp_residual(const PopulationSpectrum& h, double y, Complex z, Complex m);

/// Stieltjes transform of the limiting law given population spectrum H and
/// ratio y. Throws BadGrid when Im z <= 0 and NoConvergenceError otherwise.
MPSolveResult solve_mp(const PopulationSpectrum& h, double y, Complex z,
                       const SolverOptions& options = {},
                       std::optional<Complex> initial = std::nullopt);

struct WeightedSolveResult {
  Complex z;
  Complex m_Fw;
  Complex M;
  Complex m_tilde;
  double residual;
  std::size_t iterations;

  bool in_first_quadrant(double slack = 0.0) const noexcept;
};

/// Joint relative residual of (M, m~) against both weighted equations.
double weighted_residual(const PopulationSpectrum& h, const WeightProfile& w, double y, Complex z,
                         Complex M, Complex m_tilde);

/// Weighted system
///   M  = -(1/z) int_0^1 w_s / (1 + y m~ w_s) ds
///   m~ = -(1/z) int tau / (tau M + 1) dH(tau)
/// with m_Fw = -(1/z) int dH(tau) / (tau M + 1). `initial` warm-starts m~.
WeightedSolveResult solve_weighted_mp(const PopulationSpectrum& h, const WeightProfile& w,
                                      double y, Complex z, const SolverOptions& options = {},
                                      std::optional<Complex> initial = std::nullopt);

/// Limiting time change for the observation grid.
struct IdentityTimeChange {};
/// Density upsilon sampled on s_i = i / (m - 1); rescaled so Upsilon(1) = 1.
struct SampledTimeChange {
  std::vector<double> upsilon;
};
using TimeChange = std::variant<IdentityTimeChange, SampledTimeChange>;

/// w_s = gamma(Upsilon_s)^2 * upsilon_s, Upsilon_s = int_0^s upsilon_r dr.
WeightProfile weight_profile_from_model(const VolatilityProfile& profile,
                                        const TimeChange& timechange = IdentityTimeChange{});

using StieltjesFunction = std::function<Complex(Complex)>;

/// ys[k] = max(0, Im m(xs[k] + i v) / pi); mass_at_zero = max(0, 1 - int ys).
DensityCurve invert_stieltjes(const StieltjesFunction& m, std::span<const double> xs, double v);
/// Same, for a grid evaluated on a horizontal line z = x + iv with increasing x.
DensityCurve invert_stieltjes(const StieltjesGrid& grid);

/// 1e-3 of the support width [lo, hi]; scale-relative so tiny variances work.
double default_bandwidth(double lo, double hi);

/// solve_mp along z = x + iv, warm-starting each point from its neighbour.
StieltjesGrid solve_mp_on_line(const PopulationSpectrum& h, double y, std::span<const double> xs,
                               double v, const SolverOptions& options = {});
std::vector<WeightedSolveResult> solve_weighted_mp_on_line(const PopulationSpectrum& h,
                                                           const WeightProfile& w, double y,
                                                           std::span<const double> xs, double v,
                                                           const SolverOptions& options = {});
StieltjesGrid to_stieltjes_grid(std::span<const WeightedSolveResult> results);

/// Uniform grid of `points` values on [lo, hi].
std::vector<double> linspace(double lo, double hi, std::size_t points);

struct RecoveryOptions {
  std::size_t max_iterations = 10000;
  /// Stop when the objective falls by less than this fraction over 50 iterations.
  double stall_tolerance = 1e-9;
  /// A final relative objective above this is reported as not converged.
  double objective_threshold = 1e-2;
  SolverOptions solver = {};
};

struct RecoveryResult {
  PopulationSpectrum spectrum;
  /// sum_k |m_forward - m_esd|^2 / sum_k |m_esd|^2 at the final weights.
  double objective;
  std::size_t iterations;
  bool converged;
  std::vector<double> objective_trace;
};

/// Weights on candidate locations minimising the squared Stieltjes misfit,
/// under h >= 0 and sum h = 1, by accelerated projected gradient with
/// step halving.
RecoveryResult recover_spectrum(const SpectralDistribution& esd, double y,
                                std::span<const double> grid, std::span<const Complex> zs,
                                const RecoveryOptions& options = {});

/// 121 candidates on [0, 1.2 max lambda].
std::vector<double> default_recovery_grid(const SpectralDistribution& esd, std::size_t points = 121);
/// `count` probes x_k + i v with x_k across [min lambda, max lambda] and v = 5% of the width.
std::vector<Complex> default_probes(const SpectralDistribution& esd, std::size_t count = 80);

/// Euclidean projection onto the probability simplex.
std::vector<double> project_to_simplex(std::span<const double> v);

}  // namespace specrcv
