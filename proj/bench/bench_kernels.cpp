#include "posecal/optimize.hpp"
#include "posecal/presets.hpp"
#include "posecal/simulate.hpp"

#include <benchmark/benchmark.h>

using namespace posecal;

namespace {

// Arg 0: thread count (1 = serial reference path, 0 = OpenMP default).
Execution exec_of(const benchmark::State& state) { return Execution{static_cast<int>(state.range(0))}; }

void BM_RandomSearch(benchmark::State& state) {
  const DesignProblem p = presets::desk_6r_problem(12, CalibrationMode::Combined);
  const Execution exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(random_search(p, 2000, 1, exec).rho0_best);
  state.SetItemsProcessed(state.iterations() * 2000);
}

void BM_GeneticSearch(benchmark::State& state) {
  const DesignProblem p = presets::desk_6r_problem(12);
  GeneticOptions ga;
  ga.population = 50;
  ga.generations = 10;
  const Execution exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(genetic_search(p, ga, 1, exec).rho0_best);
}

void BM_MultiStartGradient(benchmark::State& state) {
  const DesignProblem p = presets::desk_6r_problem(8);
  OptimizerOptions o;
  o.gradient.outer_loops = 2;
  o.gradient.max_inner_iterations = 20;
  const Execution exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(multi_start(p, 8, Strategy::Gradient, 1, o, exec).rho0_best);
}

void BM_MonteCarlo(benchmark::State& state) {
  const DesignProblem p = presets::desk_6r_problem(12, CalibrationMode::Combined);
  const SimulationSpec spec{.model = p.model,
                            .mode = p.mode,
                            .mask = p.mask,
                            .truth = std::nullopt,
                            .law = {},
                            .plan = sample_plan(p, 3),
                            .test = p.test,
                            .sigma = p.sigma,
                            .n_trials = 5000,
                            .seed = 1,
                            .generator = Generator::Linearized};
  const Execution exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(monte_carlo_validation(spec, exec).empirical_rho0);
  state.SetItemsProcessed(state.iterations() * 5000);
}

}  // namespace

BENCHMARK(BM_RandomSearch)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GeneticSearch)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MultiStartGradient)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MonteCarlo)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
