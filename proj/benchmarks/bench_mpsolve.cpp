#include <benchmark/benchmark.h>

#include <cmath>

#include "specrcv/mpsolve.hpp"

using namespace specrcv;

namespace {

PopulationSpectrum spread_spectrum(std::size_t atoms) {
  std::vector<SpectrumAtom> list;
  for (std::size_t k = 0; k < atoms; ++k) list.push_back({0.5 + static_cast<double>(k) / atoms, 1.0});
  return PopulationSpectrum(std::move(list));
}

void BM_SolveMp(benchmark::State& state) {
  const PopulationSpectrum h = spread_spectrum(static_cast<std::size_t>(state.range(0)));
  const Complex z(1.0, 1e-3);
  for (auto _ : state) benchmark::DoNotOptimize(solve_mp(h, 0.5, z));
}
BENCHMARK(BM_SolveMp)->Arg(1)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);

void BM_SolveMpLine(benchmark::State& state) {
  const PopulationSpectrum h = PopulationSpectrum::delta(1.0);
  const std::vector<double> xs = linspace(0.05, 3.0, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(solve_mp_on_line(h, 0.5, xs, 1e-3));
}
BENCHMARK(BM_SolveMpLine)->Arg(1001)->Arg(4001)->Unit(benchmark::kMillisecond);

void BM_SolveWeighted(benchmark::State& state) {
  const PopulationSpectrum h = spread_spectrum(50);
  const WeightProfile steps = weight_profile_from_model(VolatilityProfile::design1());
  const WeightProfile cosine = weight_profile_from_model(VolatilityProfile::design2());
  const WeightProfile& w = state.range(0) == 0 ? steps : cosine;
  const Complex z(8e-4, 1e-6);
  for (auto _ : state) benchmark::DoNotOptimize(solve_weighted_mp(h, w, 1.0, z));
}
BENCHMARK(BM_SolveWeighted)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_Recover(benchmark::State& state) {
  const MarchenkoPasturLaw law({0.5, 1.0});
  std::vector<double> atoms;
  for (std::size_t k = 0; k < 400; ++k) {
    const double q = (static_cast<double>(k) + 0.5) / 400.0;
    double lo = 0.0;
    double hi = law.upper_edge();
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (law.cdf(mid) < q ? lo : hi) = mid;
    }
    atoms.push_back(0.5 * (lo + hi));
  }
  const SpectralDistribution esd(atoms);
  const std::vector<double> grid = default_recovery_grid(esd);
  const std::vector<Complex> probes = default_probes(esd);
  for (auto _ : state) benchmark::DoNotOptimize(recover_spectrum(esd, 0.5, grid, probes));
}
BENCHMARK(BM_Recover)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
