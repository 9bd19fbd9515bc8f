#include <benchmark/benchmark.h>

#include "specrcv/diffusion.hpp"
#include "specrcv/estimators.hpp"

using namespace specrcv;

namespace {

IncrementMatrix design1(std::size_t p, std::size_t n) {
  return simulate_increments(ClassCSpec::with_identity(p, VolatilityProfile::design1(), 1),
                             ObservationGrid::equispaced(n));
}

void BM_Simulate(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const ClassCSpec spec = ClassCSpec::with_identity(p, VolatilityProfile::design1(), 1);
  const ObservationGrid grid = ObservationGrid::equispaced(p);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_increments(spec, grid));
}
BENCHMARK(BM_Simulate)->Arg(100)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Gram(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const IncrementMatrix incr = design1(p, p);
  for (auto _ : state) benchmark::DoNotOptimize(gram(incr.increments()));
}
BENCHMARK(BM_Gram)->Arg(100)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Rcv(benchmark::State& state) {
  const IncrementMatrix incr = design1(static_cast<std::size_t>(state.range(0)), 1000);
  for (auto _ : state) benchmark::DoNotOptimize(rcv(incr));
}
BENCHMARK(BM_Rcv)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Tvarcv(benchmark::State& state) {
  const IncrementMatrix incr = design1(static_cast<std::size_t>(state.range(0)), 1000);
  for (auto _ : state) benchmark::DoNotOptimize(tvarcv(incr));
}
BENCHMARK(BM_Tvarcv)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
