#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "fixed_point.hpp"
#include "specrcv/error.hpp"
#include "specrcv/mpsolve.hpp"

namespace specrcv {

namespace {

/// Forward model on raw (location, weight) vectors: weights may be zero or,
/// at extrapolated points, slightly negative.
class ForwardModel {
 public:
  ForwardModel(std::vector<double> locations, double y, std::vector<Complex> zs,
               std::vector<Complex> targets, SolverOptions solver)
      : locations_(std::move(locations)),
        y_(y),
        zs_(std::move(zs)),
        targets_(std::move(targets)),
        solver_(solver) {
    double energy = 0.0;
    for (const Complex& t : targets_) energy += std::norm(t);
    normalizer_ = 1.0 / energy;
  }

  struct Evaluation {
    double objective;
    std::vector<double> gradient;
    std::vector<Complex> ms;
  };

  /// Objective, gradient and per-probe solutions, or nullopt when a probe
  /// fails to converge.
  std::optional<Evaluation> evaluate(const std::vector<double>& weights,
                                     const std::vector<Complex>& warm) const {
    Evaluation out{0.0, std::vector<double>(locations_.size(), 0.0), {}};
    out.ms.reserve(zs_.size());
    std::vector<Complex> inv(locations_.size());
    for (std::size_t k = 0; k < zs_.size(); ++k) {
      const Complex z = zs_[k];
      auto map = [&](Complex m) {
        Complex g = 0.0;
        Complex dg = 0.0;
        const Complex shift = 1.0 - y_ * (1.0 + z * m);
        for (std::size_t j = 0; j < locations_.size(); ++j) {
          const Complex i = 1.0 / (locations_[j] * shift - z);
          g += weights[j] * i;
          dg += weights[j] * locations_[j] * y_ * z * i * i;
        }
        return detail::MapValue{g, dg};
      };
      const detail::FixedPointOutcome outcome = detail::damped_fixed_point(map, warm[k], solver_);
      if (!outcome.converged || !(outcome.x.imag() > 0.0)) return std::nullopt;
      const Complex m = outcome.x;

      // dm/dh_j = g_j(m) / (1 - G'(m)) by implicit differentiation.
      const Complex shift = 1.0 - y_ * (1.0 + z * m);
      Complex dg = 0.0;
      for (std::size_t j = 0; j < locations_.size(); ++j) {
        inv[j] = 1.0 / (locations_[j] * shift - z);
        dg += weights[j] * locations_[j] * y_ * z * inv[j] * inv[j];
      }
      const Complex denom = 1.0 - dg;
      const Complex error = m - targets_[k];
      out.objective += normalizer_ * std::norm(error);
      const Complex coeff = 2.0 * normalizer_ * std::conj(error) / denom;
      for (std::size_t j = 0; j < locations_.size(); ++j) {
        out.gradient[j] += (coeff * inv[j]).real();
      }
      out.ms.push_back(m);
    }
    return out;
  }

  std::vector<Complex> cold_start() const {
    std::vector<Complex> ms;
    ms.reserve(zs_.size());
    for (const Complex& z : zs_) ms.push_back(-1.0 / z);
    return ms;
  }

 private:
  std::vector<double> locations_;
  double y_;
  std::vector<Complex> zs_;
  std::vector<Complex> targets_;
  SolverOptions solver_;
  double normalizer_;  // 1 / sum_k |target_k|^2
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

std::vector<double> project_to_simplex(std::span<const double> v) {
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double shift = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumulative += sorted[k];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - candidate > 0.0) shift = candidate;
  }
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = std::max(v[k] - shift, 0.0);
  return out;
}

std::vector<double> default_recovery_grid(const SpectralDistribution& esd, std::size_t points) {
  const double hi = 1.2 * std::max(esd.max(), 0.0);
  if (!(hi > 0.0)) return {0.0};
  return linspace(0.0, hi, std::max<std::size_t>(points, 2));
}

std::vector<Complex> default_probes(const SpectralDistribution& esd, std::size_t count) {
  const double lo = esd.min();
  const double hi = esd.max();
  double width = hi - lo;
  if (!(width > 0.0)) width = std::max(esd.max_abs(), 1.0);
  const double v = 0.05 * width;
  std::vector<Complex> zs;
  for (double x : linspace(lo, hi, std::max<std::size_t>(count, 1))) zs.emplace_back(x, v);
  return zs;
}

RecoveryResult recover_spectrum(const SpectralDistribution& esd, double y,
                                std::span<const double> grid, std::span<const Complex> zs,
                                const RecoveryOptions& options) {
  if (!(y > 0.0) || !std::isfinite(y)) throw Error(ErrorKind::BadSpec, "ratio y must be positive");
  if (grid.empty()) throw Error(ErrorKind::BadGrid, "candidate grid is empty");
  for (double tau : grid) {
    if (!std::isfinite(tau) || tau < 0.0) {
      throw Error(ErrorKind::BadGrid, "candidate locations must be finite and >= 0");
    }
  }
  if (zs.empty()) throw Error(ErrorKind::BadGrid, "probe set is empty");
  for (const Complex& z : zs) {
    if (!(z.imag() > 0.0)) throw Error(ErrorKind::BadGrid, "probes need Im z > 0");
  }

  const double scale = esd.mean();
  if (!(scale > 0.0)) {
    // Only the zero matrix has a nonpositive mean among PSD spectra.
    return {PopulationSpectrum::delta(0.0), 0.0, 0, true, {0.0}};
  }

  // Work in units of the ESD mean so the solver tolerances see O(1) values.
  std::vector<double> locations(grid.begin(), grid.end());
  for (double& tau : locations) tau /= scale;
  std::vector<Complex> probes(zs.begin(), zs.end());
  std::vector<Complex> targets;
  for (Complex& z : probes) {
    targets.push_back(scale * empirical_stieltjes(esd, z));
    z /= scale;
  }

  const ForwardModel model(locations, y, probes, targets, options.solver);
  const std::size_t count = locations.size();

  std::vector<double> x(count, 1.0 / static_cast<double>(count));
  auto current = model.evaluate(x, model.cold_start());
  if (!current) {
    throw NoConvergenceError(0, std::numeric_limits<double>::infinity(),
                             "recover_spectrum forward model at the uniform start");
  }

  std::vector<double> trace{current->objective};
  std::vector<double> extrapolated = x;
  auto at_extrapolated = current;
  double momentum = 1.0;
  double lipschitz = 1.0;
  std::size_t it = 0;

  for (; it < options.max_iterations; ++it) {
    if (current->objective <= 1e-28) break;

    // Backtracking: halve the step (double L) until the quadratic upper bound holds.
    std::vector<double> candidate;
    std::optional<ForwardModel::Evaluation> at_candidate;
    bool stalled = false;
    for (;;) {
      std::vector<double> step(count);
      for (std::size_t j = 0; j < count; ++j) {
        step[j] = extrapolated[j] - at_extrapolated->gradient[j] / lipschitz;
      }
      candidate = project_to_simplex(step);
      at_candidate = model.evaluate(candidate, at_extrapolated->ms);
      if (at_candidate) {
        std::vector<double> d(count);
        for (std::size_t j = 0; j < count; ++j) d[j] = candidate[j] - extrapolated[j];
        const double bound = at_extrapolated->objective + dot(at_extrapolated->gradient, d) +
                             0.5 * lipschitz * dot(d, d);
        if (at_candidate->objective <= bound) break;
      }
      lipschitz *= 2.0;
      if (lipschitz > 1e300) {
        stalled = true;
        break;
      }
    }
    if (stalled) break;

    if (at_candidate->objective > current->objective) {
      // Momentum overshoot: restart from the last accepted iterate.
      momentum = 1.0;
      extrapolated = x;
      at_extrapolated = current;
      trace.push_back(current->objective);
      continue;
    }

    const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    const double beta = (momentum - 1.0) / next_momentum;
    std::vector<double> next_extrapolated(count);
    for (std::size_t j = 0; j < count; ++j) {
      next_extrapolated[j] = candidate[j] + beta * (candidate[j] - x[j]);
    }
    x = std::move(candidate);
    current = std::move(at_candidate);
    momentum = next_momentum;
    lipschitz /= 1.5;

    auto evaluated = model.evaluate(next_extrapolated, current->ms);
    if (evaluated) {
      extrapolated = std::move(next_extrapolated);
      at_extrapolated = std::move(evaluated);
    } else {
      momentum = 1.0;
      extrapolated = x;
      at_extrapolated = current;
    }

    trace.push_back(current->objective);
    if (trace.size() > 50) {
      const double before = trace[trace.size() - 51];
      if (before - current->objective <= options.stall_tolerance * before) break;
    }
  }

  std::vector<SpectrumAtom> atoms;
  for (std::size_t j = 0; j < count; ++j) {
    if (x[j] > 0.0) atoms.push_back({grid[j], x[j]});
  }
  const double objective = current->objective;
  return {PopulationSpectrum(std::move(atoms)), objective, it,
          objective <= options.objective_threshold, std::move(trace)};
}

}  // namespace specrcv
