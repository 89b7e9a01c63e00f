#include <benchmark/benchmark.h>

#include "kernet/distributed.hpp"
#include "kernet/estimator.hpp"
#include "kernet/experiment.hpp"
#include "kernet/kernel.hpp"
#include "kernet/rng.hpp"

namespace {

using namespace kernet;

const KernelSpec& kernel() {
  static const KernelSpec k = KernelSpec::brownian_plus_one();
  return k;
}

void BM_GramBuild(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  const Points x = rng::uniform_points(Box::unit_interval(), n, 1, rng::kInputs);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gram(kernel(), x));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_GramBuild)->RangeMultiplier(2)->Range(256, 2048)->Complexity();

void BM_FitRkn(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  const LabeledSet data = generate_paper_data(n, 1);
  const double lambda = lambda_from_power(n, 2.0 / 3.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_rkn(data, lambda, kernel()));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_FitRkn)->RangeMultiplier(2)->Range(256, 2048)->Complexity();

void BM_FitBcrkn(benchmark::State& state) {
  const auto n = static_cast<Index>(state.range(0));
  const LabeledSet data = generate_paper_data(n, 1);
  const double lambda = lambda_from_power(n, 2.0 / 3.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_bcrkn(data, lambda, kernel()));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_FitBcrkn)->RangeMultiplier(2)->Range(256, 2048)->Complexity();

void BM_DistributedFit(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const LabeledSet data = generate_paper_data(2048, 1);
  const Partition part = partition(data, m, 7);
  const double lambda = lambda_from_power(2048, 2.0 / 3.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_distributed(data, part, lambda, kernel(), Variant::Bcrkn));
  }
}
BENCHMARK(BM_DistributedFit)->Arg(1)->Arg(4)->Arg(16)->Arg(64);

void BM_Predict(benchmark::State& state) {
  const auto n_test = static_cast<Index>(state.range(0));
  const LabeledSet data = generate_paper_data(512, 1);
  const FitResult fit = fit_bcrkn(data, lambda_from_power(512, 2.0 / 3.0), kernel());
  const Points test = rng::uniform_points(data.domain, n_test, 2, rng::kHoldout);
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict(fit.model, test));
  }
}
BENCHMARK(BM_Predict)->RangeMultiplier(4)->Range(256, 16384);

}  // namespace

BENCHMARK_MAIN();
