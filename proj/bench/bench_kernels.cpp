// Serial reference kernels against the OpenMP ones. Arg = worker count.

#include <benchmark/benchmark.h>

#include "advloss/datagen.hpp"
#include "advloss/riskeval.hpp"

namespace {

using namespace advloss;

struct Fixture {
  Dataset data;
  MlpModel model;
  SurrogateLoss loss = find_loss("ce");
  AttackSpec spec;

  Fixture() : data(make_blobs(512, 2, 3, 0.08, 1)) {
    Rng rng(7);
    const std::size_t dims[] = {2, 16, 16, 3};
    model = MlpModel::random(dims, rng);
    spec.epsilon = 0.05;
    spec.seed = 11;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_ApproxRiskReference(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(reference::approx_risk(f.model, f.loss, f.data, f.spec));
}

void BM_ApproxRiskParallel(benchmark::State& state) {
  const auto& f = fixture();
  const ExecPolicy exec{static_cast<int>(state.range(0)), 64};
  for (auto _ : state)
    benchmark::DoNotOptimize(approx_risk(f.model, f.loss, f.data, f.spec, exec));
}

void BM_GridOracleReference(benchmark::State& state) {
  const auto& f = fixture();
  const Dataset part = f.data.head(64);
  for (auto _ : state)
    benchmark::DoNotOptimize(reference::grid_oracle_risk(f.model, part, 0.05, 8));
}

void BM_GridOracleParallel(benchmark::State& state) {
  const auto& f = fixture();
  const Dataset part = f.data.head(64);
  const ExecPolicy exec{static_cast<int>(state.range(0)), 64};
  for (auto _ : state)
    benchmark::DoNotOptimize(grid_oracle_risk(f.model, part, 0.05, 8, exec));
}

}  // namespace

BENCHMARK(BM_ApproxRiskReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ApproxRiskParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GridOracleReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GridOracleParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
