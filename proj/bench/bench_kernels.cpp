#include <benchmark/benchmark.h>

#include "persona/kernels.hpp"
#include "persona/rng.hpp"

using namespace persona;

namespace {

kernels::Matrix data(int n, int d) {
  Rng rng(1);
  kernels::Matrix x(n, d);
  for (int i = 0; i < x.size(); ++i) x(i) = standard_normal(rng);
  return x;
}

void BM_GramSerial(benchmark::State& st) {
  const auto x = data(static_cast<int>(st.range(0)), 3);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::gaussian_gram_serial(x, 1.0));
}

void BM_GramParallel(benchmark::State& st) {
  const auto x = data(static_cast<int>(st.range(0)), 3);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::gaussian_gram(x, 1.0));
}

void BM_PermutedSerial(benchmark::State& st) {
  const auto x = data(static_cast<int>(st.range(0)), 1);
  const auto k = kernels::double_center(kernels::gaussian_gram_serial(x, 1.0));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::permuted_inner_serial(k, k, 100, 7));
}

void BM_PermutedParallel(benchmark::State& st) {
  const auto x = data(static_cast<int>(st.range(0)), 1);
  const auto k = kernels::double_center(kernels::gaussian_gram_serial(x, 1.0));
  for (auto _ : st) benchmark::DoNotOptimize(kernels::permuted_inner(k, k, 100, 7));
}

const std::vector<double> kLam{2.0, 1.0, 0.5, 0.25, 0.1, 0.05};

void BM_SpectralSerial(benchmark::State& st) {
  for (auto _ : st)
    benchmark::DoNotOptimize(kernels::spectral_null_serial(kLam, kLam, static_cast<int>(st.range(0)), 7));
}

void BM_SpectralParallel(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(kernels::spectral_null(kLam, kLam, static_cast<int>(st.range(0)), 7));
}

}  // namespace

BENCHMARK(BM_GramSerial)->Arg(250)->Arg(1000);
BENCHMARK(BM_GramParallel)->Arg(250)->Arg(1000);
BENCHMARK(BM_PermutedSerial)->Arg(250)->Arg(500);
BENCHMARK(BM_PermutedParallel)->Arg(250)->Arg(500);
BENCHMARK(BM_SpectralSerial)->Arg(5000);
BENCHMARK(BM_SpectralParallel)->Arg(5000);

BENCHMARK_MAIN();
