#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "specrcv/covmodel.hpp"

namespace specrcv {

struct ConstantVolatility {
  double sigma;
};

/// gamma_t = gammas[i] on [breaks[i], breaks[i+1]); the last piece is closed at 1.
struct PiecewiseVolatility {
  std::vector<double> breaks;  // 0 = t_0 < t_1 < ... < t_k = 1
  std::vector<double> gammas;  // k values
};

/// gamma_t^2 = c0 + c1 cos(2 pi t), requires c0 > |c1|.
struct CosineVolatility {
  double c0;
  double c1;
};

/// gamma sampled at t_i = i / (m - 1), linearly interpolated in between.
struct SampledVolatility {
  std::vector<double> gammas;
};

/// Deterministic scalar time profile gamma_t on [0, 1], bounded away from 0.
class VolatilityProfile {
 public:
  using Kind = std::variant<ConstantVolatility, PiecewiseVolatility, CosineVolatility,
                            SampledVolatility>;

  static VolatilityProfile constant(double sigma);
  static VolatilityProfile piecewise(std::vector<double> breaks, std::vector<double> gammas);
  static VolatilityProfile cosine(double c0, double c1);
  static VolatilityProfile sampled(std::vector<double> gammas);

  /// gamma_t^2 = a * 1e-4 on [0, 1/4) and [3/4, 1], b * 1e-4 on [1/4, 3/4).
  static VolatilityProfile design1(double a = 7.0, double b = 1.0);
  /// gamma_t^2 = c0 + c1 cos(2 pi t).
  static VolatilityProfile design2(double c0 = 9e-4, double c1 = 8e-4);

  const Kind& kind() const noexcept { return kind_; }

  double gamma(double t) const;
  double gamma_sq(double t) const;

  /// Canonical text form, stable across runs; used for digests and manifests.
  std::string describe() const;

 private:
  explicit VolatilityProfile(Kind kind);
  Kind kind_;
};

/// Integral of gamma_t^2 over [a, b]. Exact for every profile kind: the sampled
/// kind uses Simpson's rule on knot-aligned panels, where gamma^2 is quadratic.
double integrate_gamma_sq(const VolatilityProfile& profile, double a, double b);

inline constexpr double kDefaultDurationBound = 10.0;

/// Observation times 0 = tau_0 < tau_1 < ... < tau_n = 1.
class ObservationGrid {
 public:
  /// Throws BadSpec unless the times are strictly increasing from 0 to 1 and
  /// max n * (tau_l - tau_{l-1}) <= duration_bound.
  explicit ObservationGrid(std::vector<double> times,
                           double duration_bound = kDefaultDurationBound);

  static ObservationGrid equispaced(std::size_t n);
  /// n - 1 sorted uniform interior points, redrawn until the duration bound holds.
  static ObservationGrid poisson(std::size_t n, std::uint64_t seed,
                                 double duration_bound = kDefaultDurationBound);

  std::size_t intervals() const noexcept { return times_.size() - 1; }
  std::span<const double> times() const noexcept { return times_; }
  double duration(std::size_t l) const { return times_[l + 1] - times_[l]; }
  double max_scaled_duration() const;
  bool is_equispaced() const;

 private:
  std::vector<double> times_;
};

struct EquispacedGrid {
  std::size_t n;
};
struct PoissonGrid {
  std::size_t n;
  std::uint64_t seed;
};
using GridKind = std::variant<EquispacedGrid, PoissonGrid>;

ObservationGrid make_grid(const GridKind& kind);

/// Class-C diffusion dX_t = mu dt + gamma_t Lambda dW_t with deterministic gamma.
class ClassCSpec {
 public:
  /// Lambda is rescaled so that tr(Lambda Lambda^T) = p. An empty drift means
  /// zero drift. Throws BadSpec on shape mismatch, a zero Lambda, or a drift
  /// entry exceeding drift_bound.
  ClassCSpec(std::size_t p, VolatilityProfile profile, Matrix lambda,
             std::vector<double> drift = {}, std::uint64_t seed = 0,
             double drift_bound = std::numeric_limits<double>::infinity());

  static ClassCSpec with_identity(std::size_t p, VolatilityProfile profile,
                                  std::uint64_t seed = 0);

  std::size_t p() const noexcept { return p_; }
  const VolatilityProfile& profile() const noexcept { return profile_; }
  const Matrix& lambda() const noexcept { return lambda_; }
  std::span<const double> drift() const noexcept { return drift_; }
  std::uint64_t seed() const noexcept { return seed_; }
  bool lambda_is_diagonal() const noexcept { return lambda_diagonal_; }
  const std::string& digest() const noexcept { return digest_; }

  ClassCSpec with_seed(std::uint64_t seed) const;

  /// Lambda Lambda^T, whose trace is p.
  CovMatrix normalized_icv() const;
  /// (int_0^1 gamma^2 dt) Lambda Lambda^T.
  CovMatrix icv() const;

 private:
  void refresh_digest();

  std::size_t p_;
  VolatilityProfile profile_;
  Matrix lambda_;
  std::vector<double> drift_;
  std::uint64_t seed_;
  bool lambda_diagonal_ = false;
  std::string digest_;
};

/// Observed increments: row l holds X_{tau_l} - X_{tau_{l-1}}.
class IncrementMatrix {
 public:
  IncrementMatrix(Matrix increments, ObservationGrid grid, std::string spec_digest);

  std::size_t n() const noexcept { return static_cast<std::size_t>(increments_.rows()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(increments_.cols()); }
  const Matrix& increments() const noexcept { return increments_; }
  const ObservationGrid& grid() const noexcept { return grid_; }
  const std::string& spec_digest() const noexcept { return spec_digest_; }

 private:
  Matrix increments_;
  ObservationGrid grid_;
  std::string spec_digest_;
};

/// Per-replicate stream seed.
constexpr std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t replicate) noexcept {
  return seed ^ replicate;
}

/// Exact-in-distribution sampling:
/// dX_l = mu * dtau_l + sqrt(int_{tau_{l-1}}^{tau_l} gamma^2 dt) * Lambda * Z_l.
IncrementMatrix simulate_increments(const ClassCSpec& spec, const ObservationGrid& grid);

/// Constant-volatility path with the same ICV: gamma replaced by
/// (int_0^1 gamma^2 dt)^{1/2}, zero drift and an independent Brownian stream.
IncrementMatrix comparator_increments(const ClassCSpec& spec, const ObservationGrid& grid);

}  // namespace specrcv
