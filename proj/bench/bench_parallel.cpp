#include <benchmark/benchmark.h>

#include <filesystem>

#include "hpoloop/coverage.hpp"
#include "hpoloop/harness.hpp"
#include "hpoloop/plan.hpp"

using namespace hpoloop;

namespace {

void BM_coverage_serial(benchmark::State& state) {
  CoverageParams p;
  p.repetitions = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(coverage_serial(p).hits);
  state.SetItemsProcessed(state.iterations() * p.repetitions);
}

void BM_coverage_parallel(benchmark::State& state) {
  CoverageParams p;
  p.repetitions = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(coverage_parallel(p).hits);
  state.SetItemsProcessed(state.iterations() * p.repetitions);
}

ExperimentPlan bench_plan(RunPolicy policy) {
  ExperimentPlan plan = parse_plan(json{{"task", {{"kind", "convex2d"}}},
                                        {"strategy", "tpe"},
                                        {"trials_per_run", 20},
                                        {"n_runs", 8},
                                        {"master_seed", 1}},
                                   std::filesystem::temp_directory_path());
  plan.output_dir = std::filesystem::temp_directory_path() /
                    (policy == RunPolicy::serial ? "hpoloop_bench_serial" : "hpoloop_bench_parallel");
  plan.workers = 8;
  return plan;
}

void BM_experiment(benchmark::State& state, RunPolicy policy) {
  const auto plan = bench_plan(policy);
  for (auto _ : state) {
    std::filesystem::remove_all(plan.output_dir);
    benchmark::DoNotOptimize(run_experiment(plan, policy).report.run_count);
  }
  std::filesystem::remove_all(plan.output_dir);
}

}  // namespace

BENCHMARK(BM_coverage_serial)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_coverage_parallel)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_experiment, serial, RunPolicy::serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_experiment, parallel, RunPolicy::parallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
