#include <benchmark/benchmark.h>

#include <random>

#include "specrcv/covmodel.hpp"
#include "specrcv/spectra.hpp"

using namespace specrcv;

namespace {

Matrix wishart(std::size_t p) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  Matrix x(static_cast<Eigen::Index>(2 * p), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  return x.transpose() * x / static_cast<double>(2 * p);
}

void BM_Esd(benchmark::State& state) {
  const CovMatrix c(wishart(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(esd(c));
}
BENCHMARK(BM_Esd)->Arg(100)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Levy(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const SpectralDistribution f = esd(CovMatrix(wishart(p)));
  std::vector<double> shifted(f.eigenvalues().begin(), f.eigenvalues().end());
  for (double& v : shifted) v *= 1.05;
  const SpectralDistribution g(shifted);
  for (auto _ : state) benchmark::DoNotOptimize(levy_distance(f, g));
}
BENCHMARK(BM_Levy)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_EmpiricalStieltjes(benchmark::State& state) {
  const SpectralDistribution f = esd(CovMatrix(wishart(500)));
  std::vector<Complex> zs;
  for (int k = 0; k < 200; ++k) zs.emplace_back(0.02 * k, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(empirical_stieltjes(f, zs));
}
BENCHMARK(BM_EmpiricalStieltjes)->Unit(benchmark::kMicrosecond);

}  // namespace
