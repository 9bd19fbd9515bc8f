#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>

#include "specrcv/mpsolve.hpp"

namespace specrcv::detail {

inline double relative_gap(Complex x, Complex g) { return std::abs(x - g) / std::max(1.0, std::abs(x)); }

struct MapValue {
  Complex g;
  Complex dg;
};

struct FixedPointOutcome {
  Complex x;
  double residual;
  std::size_t iterations;
  bool converged;
};

/// x_{k+1} = (1 - alpha) x_k + alpha G(x_k), alpha halving on residual growth
/// down to min_damping, with an optional Newton step on x - G(x) that is kept
/// only when it stays in the upper half plane and beats the damped step.
template <class Map>
FixedPointOutcome damped_fixed_point(const Map& map, Complex x0, const SolverOptions& options) {
  Complex x = x0;
  MapValue value = map(x);
  double residual = relative_gap(x, value.g);
  double alpha = 1.0;

  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    if (residual <= options.tolerance) return {x, residual, it, true};

    Complex next = (1.0 - alpha) * x + alpha * value.g;
    MapValue next_value = map(next);
    double next_residual = relative_gap(next, next_value.g);
    const bool damped_grew = next_residual > residual;

    if (options.newton) {
      const Complex slope = 1.0 - value.dg;
      if (std::abs(slope) > 0.0) {
        const Complex candidate = x - (x - value.g) / slope;
        if (candidate.imag() > 0.0 && std::isfinite(candidate.real()) &&
            std::isfinite(candidate.imag())) {
          MapValue candidate_value = map(candidate);
          const double candidate_residual = relative_gap(candidate, candidate_value.g);
          if (candidate_residual < next_residual) {
            next = candidate;
            next_value = candidate_value;
            next_residual = candidate_residual;
          }
        }
      }
    }
    if (damped_grew) alpha = std::max(0.5 * alpha, options.min_damping);

    x = next;
    value = next_value;
    residual = next_residual;
  }
  return {x, residual, options.max_iterations, residual <= options.tolerance};
}

}  // namespace specrcv::detail
