#include <random>

#include <benchmark/benchmark.h>

#include "cotransport/estimator.hpp"
#include "cotransport/formation.hpp"
#include "cotransport/mission.hpp"
#include "cotransport/scenario.hpp"

using namespace cotransport;

namespace {

const Scenario& lshape() {
  static const Scenario s = builtin_scenario("lshape_sim1");
  return s;
}

ParameterGrid grid_of(const Scenario& s) { return build_parameter_grid(s.grid, s.payload.com_region); }

template <bool Parallel>
void BM_LambdaTable(benchmark::State& st) {
  const Scenario& s = lshape();
  const ParameterGrid grid = grid_of(s);
  const std::vector<SlotPair> pairs = adjacent_pairs(s.payload.candidates.size(), s.payload.rail.closed());
  for (auto _ : st) {
    LambdaTable t = Parallel ? build_lambda_table(s.payload, grid, pairs, true)
                             : build_lambda_table_serial(s.payload, grid, pairs, true);
    benchmark::DoNotOptimize(t);
  }
}

template <bool Parallel>
void BM_MutualInformation(benchmark::State& st) {
  const Scenario& s = lshape();
  const EstimationState state = make_estimation_state(s.payload, grid_of(s), true);
  for (auto _ : st) {
    std::vector<double> mi = Parallel ? mutual_information_all(state, 1.0) : mutual_information_all_serial(state, 1.0);
    benchmark::DoNotOptimize(mi);
  }
}

template <bool Parallel>
void BM_FormationRestarts(benchmark::State& st) {
  const Scenario& s = lshape();
  FormationConfig cfg = s.formation;
  cfg.parallel = Parallel;
  for (auto _ : st) {
    std::mt19937_64 rng(1);
    auto result = optimize_formation(s.payload, s.theta_true, s.payload.n_robots, cfg, rng);
    benchmark::DoNotOptimize(result);
  }
}

template <bool Parallel>
void BM_Sweep(benchmark::State& st) {
  const Scenario& s = lshape();
  for (auto _ : st) {
    SweepResult r = Parallel ? run_sweep(s, 8) : run_sweep_serial(s, 8);
    benchmark::DoNotOptimize(r);
  }
}

}  // namespace

BENCHMARK(BM_LambdaTable<false>)->Name("lambda_table/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LambdaTable<true>)->Name("lambda_table/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MutualInformation<false>)->Name("mutual_information/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MutualInformation<true>)->Name("mutual_information/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FormationRestarts<false>)->Name("formation_restarts/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FormationRestarts<true>)->Name("formation_restarts/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Sweep<false>)->Name("sweep8/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Sweep<true>)->Name("sweep8/openmp")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
