#include "specrcv/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "numfmt.hpp"
#include "specrcv/digest.hpp"
#include "specrcv/error.hpp"

namespace specrcv {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_positive(double value, const char* what) {
  if (!std::isfinite(value) || value <= 0.0) {
    throw Error(ErrorKind::BadSpec, std::string(what) + " must be positive and finite");
  }
}

double sampled_gamma(const SampledVolatility& s, double t) {
  const std::size_t segments = s.gammas.size() - 1;
  const double pos = std::clamp(t, 0.0, 1.0) * static_cast<double>(segments);
  const std::size_t k = std::min(static_cast<std::size_t>(pos), segments - 1);
  const double frac = pos - static_cast<double>(k);
  return (1.0 - frac) * s.gammas[k] + frac * s.gammas[k + 1];
}

}  // namespace

VolatilityProfile::VolatilityProfile(Kind kind) : kind_(std::move(kind)) {}

VolatilityProfile VolatilityProfile::constant(double sigma) {
  require_positive(sigma, "constant volatility");
  return VolatilityProfile(ConstantVolatility{sigma});
}

VolatilityProfile VolatilityProfile::piecewise(std::vector<double> breaks,
                                               std::vector<double> gammas) {
  if (gammas.empty() || breaks.size() != gammas.size() + 1) {
    throw Error(ErrorKind::BadSpec, "piecewise profile needs k values and k + 1 breaks");
  }
  if (breaks.front() != 0.0 || breaks.back() != 1.0) {
    throw Error(ErrorKind::BadSpec, "piecewise breaks must run from 0 to 1");
  }
  for (std::size_t i = 1; i < breaks.size(); ++i) {
    if (!(breaks[i] > breaks[i - 1])) {
      throw Error(ErrorKind::BadSpec, "piecewise breaks must be strictly increasing");
    }
  }
  for (double g : gammas) require_positive(g, "piecewise volatility value");
  return VolatilityProfile(PiecewiseVolatility{std::move(breaks), std::move(gammas)});
}

VolatilityProfile VolatilityProfile::cosine(double c0, double c1) {
  if (!std::isfinite(c0) || !std::isfinite(c1) || !(c0 > std::abs(c1))) {
    throw Error(ErrorKind::BadSpec, "cosine profile needs c0 > |c1|");
  }
  return VolatilityProfile(CosineVolatility{c0, c1});
}

VolatilityProfile VolatilityProfile::sampled(std::vector<double> gammas) {
  if (gammas.size() < 2) throw Error(ErrorKind::BadSpec, "sampled profile needs >= 2 values");
  for (double g : gammas) require_positive(g, "sampled volatility value");
  return VolatilityProfile(SampledVolatility{std::move(gammas)});
}

VolatilityProfile VolatilityProfile::design1(double a, double b) {
  require_positive(a, "design I outer level");
  require_positive(b, "design I inner level");
  const double outer = std::sqrt(a * 1e-4);
  const double inner = std::sqrt(b * 1e-4);
  return piecewise({0.0, 0.25, 0.75, 1.0}, {outer, inner, outer});
}

VolatilityProfile VolatilityProfile::design2(double c0, double c1) { return cosine(c0, c1); }

double VolatilityProfile::gamma(double t) const { return std::sqrt(gamma_sq(t)); }

double VolatilityProfile::gamma_sq(double t) const {
  return std::visit(
      Overloaded{
          [](const ConstantVolatility& c) { return c.sigma * c.sigma; },
          [t](const PiecewiseVolatility& pw) {
            const auto it = std::upper_bound(pw.breaks.begin(), pw.breaks.end(), t);
            auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - pw.breaks.begin() - 1, 0));
            k = std::min(k, pw.gammas.size() - 1);
            return pw.gammas[k] * pw.gammas[k];
          },
          [t](const CosineVolatility& c) {
            return c.c0 + c.c1 * std::cos(2.0 * std::numbers::pi * t);
          },
          [t](const SampledVolatility& s) {
            const double g = sampled_gamma(s, t);
            return g * g;
          },
      },
      kind_);
}

std::string VolatilityProfile::describe() const {
  using detail::join;
  using detail::shortest;
  return std::visit(
      Overloaded{
          [](const ConstantVolatility& c) { return "constant(sigma=" + shortest(c.sigma) + ")"; },
          [](const PiecewiseVolatility& pw) {
            return "piecewise(breaks=" + join(pw.breaks) + ",gammas=" + join(pw.gammas) + ")";
          },
          [](const CosineVolatility& c) {
            return "cosine(c0=" + shortest(c.c0) + ",c1=" + shortest(c.c1) + ")";
          },
          [](const SampledVolatility& s) { return "sampled(gammas=" + join(s.gammas) + ")"; },
      },
      kind_);
}

double integrate_gamma_sq(const VolatilityProfile& profile, double a, double b) {
  if (!(a >= 0.0 && a <= b && b <= 1.0)) {
    throw Error(ErrorKind::OutOfDomain, "integration interval must lie in [0, 1] with a <= b");
  }
  return std::visit(
      Overloaded{
          [&](const ConstantVolatility& c) { return c.sigma * c.sigma * (b - a); },
          [&](const PiecewiseVolatility& pw) {
            double total = 0.0;
            for (std::size_t i = 0; i < pw.gammas.size(); ++i) {
              const double lo = std::max(a, pw.breaks[i]);
              const double hi = std::min(b, pw.breaks[i + 1]);
              if (hi > lo) total += pw.gammas[i] * pw.gammas[i] * (hi - lo);
            }
            return total;
          },
          [&](const CosineVolatility& c) {
            const double two_pi = 2.0 * std::numbers::pi;
            return c.c0 * (b - a) + c.c1 * (std::sin(two_pi * b) - std::sin(two_pi * a)) / two_pi;
          },
          [&](const SampledVolatility& s) {
            const std::size_t segments = s.gammas.size() - 1;
            const double h = 1.0 / static_cast<double>(segments);
            double total = 0.0;
            for (std::size_t k = 0; k < segments; ++k) {
              const double lo = std::max(a, static_cast<double>(k) * h);
              const double hi = std::min(b, static_cast<double>(k + 1) * h);
              if (!(hi > lo)) continue;
              // gamma is linear on a knot interval, so Simpson is exact for gamma^2.
              auto g_sq = [&](double t) {
                const double frac = std::clamp((t - static_cast<double>(k) * h) / h, 0.0, 1.0);
                const double g = (1.0 - frac) * s.gammas[k] + frac * s.gammas[k + 1];
                return g * g;
              };
              total += (hi - lo) / 6.0 * (g_sq(lo) + 4.0 * g_sq(0.5 * (lo + hi)) + g_sq(hi));
            }
            return total;
          },
      },
      profile.kind());
}

ObservationGrid::ObservationGrid(std::vector<double> times, double duration_bound)
    : times_(std::move(times)) {
  if (times_.size() < 2) throw Error(ErrorKind::BadSpec, "grid needs at least one interval");
  if (times_.front() != 0.0 || times_.back() != 1.0) {
    throw Error(ErrorKind::BadSpec, "grid must start at 0 and end at 1");
  }
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) {
      throw Error(ErrorKind::BadSpec, "grid times must be strictly increasing");
    }
  }
  if (max_scaled_duration() > duration_bound * (1.0 + 1e-12)) {
    throw Error(ErrorKind::BadSpec, "max n * duration " + std::to_string(max_scaled_duration()) +
                                        " exceeds bound " + std::to_string(duration_bound));
  }
}

ObservationGrid ObservationGrid::equispaced(std::size_t n) {
  if (n == 0) throw Error(ErrorKind::BadSpec, "grid needs n >= 1");
  std::vector<double> times(n + 1);
  for (std::size_t l = 0; l <= n; ++l) times[l] = static_cast<double>(l) / static_cast<double>(n);
  times.back() = 1.0;
  return ObservationGrid(std::move(times));
}

ObservationGrid ObservationGrid::poisson(std::size_t n, std::uint64_t seed, double duration_bound) {
  if (n == 0) throw Error(ErrorKind::BadSpec, "grid needs n >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double nd = static_cast<double>(n);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<double> times(n + 1);
    times.front() = 0.0;
    times.back() = 1.0;
    for (std::size_t l = 1; l < n; ++l) times[l] = uniform(rng);
    std::sort(times.begin() + 1, times.end() - 1);
    bool ok = true;
    for (std::size_t l = 1; l <= n && ok; ++l) {
      const double d = times[l] - times[l - 1];
      ok = d > 0.0 && nd * d <= duration_bound;
    }
    if (ok) return ObservationGrid(std::move(times), duration_bound);
  }
  throw Error(ErrorKind::BadSpec, "could not draw a random grid within the duration bound");
}

double ObservationGrid::max_scaled_duration() const {
  double longest = 0.0;
  for (std::size_t l = 0; l + 1 < times_.size(); ++l) longest = std::max(longest, duration(l));
  return longest * static_cast<double>(intervals());
}

bool ObservationGrid::is_equispaced() const {
  const double n = static_cast<double>(intervals());
  for (std::size_t l = 0; l < times_.size(); ++l) {
    if (std::abs(times_[l] - static_cast<double>(l) / n) > 1e-15) return false;
  }
  return true;
}

ObservationGrid make_grid(const GridKind& kind) {
  return std::visit(Overloaded{
                        [](const EquispacedGrid& g) { return ObservationGrid::equispaced(g.n); },
                        [](const PoissonGrid& g) { return ObservationGrid::poisson(g.n, g.seed); },
                    },
                    kind);
}

ClassCSpec::ClassCSpec(std::size_t p, VolatilityProfile profile, Matrix lambda,
                       std::vector<double> drift, std::uint64_t seed, double drift_bound)
    : p_(p),
      profile_(std::move(profile)),
      lambda_(std::move(lambda)),
      drift_(std::move(drift)),
      seed_(seed) {
  const auto pi = static_cast<Eigen::Index>(p_);
  if (p_ == 0) throw Error(ErrorKind::BadSpec, "dimension p must be >= 1");
  if (lambda_.rows() != pi || lambda_.cols() != pi) {
    throw Error(ErrorKind::BadSpec, "Lambda must be " + std::to_string(p_) + "x" +
                                        std::to_string(p_));
  }
  if (!lambda_.allFinite()) throw Error(ErrorKind::BadSpec, "Lambda has non-finite entries");
  const double trace = lambda_.squaredNorm();  // tr(Lambda Lambda^T)
  if (!(trace > 0.0)) throw Error(ErrorKind::BadSpec, "Lambda must be nonzero");
  lambda_ *= std::sqrt(static_cast<double>(p_) / trace);

  if (!drift_.empty() && drift_.size() != p_) {
    throw Error(ErrorKind::BadSpec, "drift must be empty or have p entries");
  }
  for (double mu : drift_) {
    if (!std::isfinite(mu) || std::abs(mu) > drift_bound) {
      throw Error(ErrorKind::BadSpec, "drift entry exceeds the declared bound");
    }
  }

  lambda_diagonal_ = true;
  for (Eigen::Index j = 0; j < pi && lambda_diagonal_; ++j) {
    for (Eigen::Index i = 0; i < pi; ++i) {
      if (i != j && lambda_(i, j) != 0.0) {
        lambda_diagonal_ = false;
        break;
      }
    }
  }
  refresh_digest();
}

ClassCSpec ClassCSpec::with_identity(std::size_t p, VolatilityProfile profile, std::uint64_t seed) {
  const auto pi = static_cast<Eigen::Index>(p);
  return ClassCSpec(p, std::move(profile), Matrix::Identity(pi, pi), {}, seed);
}

ClassCSpec ClassCSpec::with_seed(std::uint64_t seed) const {
  ClassCSpec copy = *this;
  copy.seed_ = seed;
  copy.refresh_digest();
  return copy;
}

void ClassCSpec::refresh_digest() {
  Sha256 hash;
  hash.update("specrcv-classc-v1;p=" + std::to_string(p_) + ";profile=" + profile_.describe() +
              ";seed=" + std::to_string(seed_) + ";lambda=");
  hash.update(std::span<const double>(lambda_.data(), static_cast<std::size_t>(lambda_.size())));
  hash.update(";drift=");
  hash.update(std::span<const double>(drift_));
  digest_ = hash.hex();
}

CovMatrix ClassCSpec::normalized_icv() const { return CovMatrix(lambda_ * lambda_.transpose()); }

CovMatrix ClassCSpec::icv() const {
  return normalized_icv().scaled(integrate_gamma_sq(profile_, 0.0, 1.0));
}

IncrementMatrix::IncrementMatrix(Matrix increments, ObservationGrid grid, std::string spec_digest)
    : increments_(std::move(increments)), grid_(std::move(grid)), spec_digest_(std::move(spec_digest)) {
  if (static_cast<std::size_t>(increments_.rows()) != grid_.intervals()) {
    throw Error(ErrorKind::BadSpec, "increment rows must match grid intervals");
  }
  if (increments_.cols() == 0) throw Error(ErrorKind::BadSpec, "increments need p >= 1");
}

namespace {

constexpr std::uint64_t kComparatorStream = 0x9e3779b97f4a7c15ULL;

IncrementMatrix sample_paths(const ClassCSpec& spec, const ObservationGrid& grid,
                             const VolatilityProfile& profile, bool with_drift,
                             std::uint64_t stream_seed, std::string digest) {
  const auto n = static_cast<Eigen::Index>(grid.intervals());
  const auto p = static_cast<Eigen::Index>(spec.p());

  std::mt19937_64 rng(stream_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(n, p);
  for (Eigen::Index l = 0; l < n; ++l) {
    for (Eigen::Index j = 0; j < p; ++j) z(l, j) = normal(rng);
  }

  // Row l of the result is (Lambda Z_l)^T = Z_l^T Lambda^T.
  Matrix x;
  if (spec.lambda_is_diagonal()) {
    x = z * spec.lambda().diagonal().asDiagonal();
  } else {
    x = z * spec.lambda().transpose();
  }

  const auto times = grid.times();
  const bool drift = with_drift && !spec.drift().empty();
  for (Eigen::Index l = 0; l < n; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const double scale = std::sqrt(integrate_gamma_sq(profile, times[li], times[li + 1]));
    x.row(l) *= scale;
    if (drift) {
      const double dt = grid.duration(li);
      for (Eigen::Index j = 0; j < p; ++j) {
        x(l, j) += spec.drift()[static_cast<std::size_t>(j)] * dt;
      }
    }
  }
  return IncrementMatrix(std::move(x), grid, std::move(digest));
}

}  // namespace

IncrementMatrix simulate_increments(const ClassCSpec& spec, const ObservationGrid& grid) {
  return sample_paths(spec, grid, spec.profile(), true, spec.seed(), spec.digest());
}

IncrementMatrix comparator_increments(const ClassCSpec& spec, const ObservationGrid& grid) {
  const double theta = integrate_gamma_sq(spec.profile(), 0.0, 1.0);
  return sample_paths(spec, grid, VolatilityProfile::constant(std::sqrt(theta)), false,
                      spec.seed() ^ kComparatorStream, sha256_hex(spec.digest() + ";comparator"));
}

}  // namespace specrcv
