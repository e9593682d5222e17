#include "posecal/optimize.hpp"

#include "search_common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace posecal {

namespace detail {

bool better(const Individual& a, const Individual& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (!a.feasible) return a.violation < b.violation;
  return a.rho0 < b.rho0;
}

std::vector<std::size_t> ranking(const std::vector<Individual>& pop) {
  std::vector<std::size_t> order(pop.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return better(pop[a], pop[b]); });
  return order;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  double sum = 0.0;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (!std::isfinite(v)) {
      ++s.unidentifiable;
      continue;
    }
    ++s.count;
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  if (s.count == 0) {
    s.min = s.max = s.mean = std::numeric_limits<double>::quiet_NaN();
  } else {
    s.mean = sum / static_cast<double>(s.count);
  }
  return s;
}

void TraceBuilder::add(std::uint64_t evaluations, double elapsed_s, double rho0) {
  if (!std::isfinite(rho0)) return;
  if (!points_.empty() && rho0 >= points_.back().best_rho0) return;
  points_.push_back({evaluations, elapsed_s, rho0});
}

void TraceBuilder::append_run(std::span<const TracePoint> run, std::uint64_t offset) {
  for (const auto& p : run) add(p.evaluations + offset, p.elapsed_s, p.best_rho0);
}

}  // namespace detail

namespace {

using detail::Clock;

void require_positive(std::size_t n, const char* what) {
  if (n < 1) throw InvalidInput(std::string(what) + " must be >= 1");
}

// Serially merges per-run results in index order.
DesignReport merge_runs(Strategy strategy, std::uint64_t seed, const OptimizerOptions& options,
                        std::vector<DesignReport>& runs) {
  DesignReport report;
  report.strategy = strategy;
  report.seed = seed;
  report.options = options;
  detail::TraceBuilder trace;
  std::vector<double> finals;
  std::size_t best = runs.size();
  for (std::size_t r = 0; r < runs.size(); ++r) {
    auto& run = runs[r];
    trace.append_run(run.trace, report.evaluations);
    report.evaluations += run.evaluations;
    finals.push_back(run.rho0_best);
    if (best == runs.size() || run.rho0_best < runs[best].rho0_best) best = r;
    for (auto rec : run.runs) {
      rec.index = report.runs.size();
      report.runs.push_back(rec);
    }
  }
  if (!std::isfinite(runs[best].rho0_best)) {
    throw Unidentifiable(std::string(to_string(strategy)) + ": all " + std::to_string(runs.size()) +
                         " runs ended unidentifiable");
  }
  report.summary = detail::summarize(finals);
  report.best_plan = runs[best].best_plan;
  report.rho0_best = runs[best].rho0_best;
  report.final_population = std::move(runs[best].final_population);
  report.trace = trace.take();
  return report;
}

DesignReport single_gradient(const DesignProblem& problem, std::uint64_t seed,
                             const GradientOptions& options) {
  const ExperimentPlan start = sample_plan(problem, seed);
  const GradientResult g = gradient_search(problem, start, options);
  DesignReport r;
  r.strategy = Strategy::Gradient;
  r.seed = seed;
  r.best_plan = g.plan;
  r.rho0_best = g.rho0;
  r.runs.push_back(RunRecord{0, seed, g.start_objective, g.rho0, g.iterations, g.evaluations, -1});
  r.trace = g.trace;
  r.evaluations = g.evaluations;
  return r;
}

// Replace every infeasible pose of `x` with a fresh feasible sample.
VecX repair_plan(const DesignProblem& problem, const PlanObjective& obj, VecX x, std::uint64_t seed) {
  const DesignSpace& space = obj.space();
  const DesignProblem one = problem.with_size(1);
  const DesignSpace one_space(one);
  const auto per = static_cast<Eigen::Index>(space.vars_per_pose());
  for (std::size_t p = 0; p < space.poses(); ++p) {
    if (obj.pose_max_constraint(x, p) <= kFeasibilityTol) continue;
    const ExperimentPlan fresh = sample_plan(one, derive_seed(seed, p));
    x.segment(static_cast<Eigen::Index>(p) * per, per) = one_space.snap(one_space.encode(fresh));
  }
  return x;
}

}  // namespace

DesignReport random_search(const DesignProblem& problem, std::size_t n_samples, std::uint64_t seed,
                           const Execution& exec) {
  problem.validate();
  require_positive(n_samples, "random_search: n_samples");
  const auto t0 = Clock::now();
  const PlanObjective obj(problem);
  std::vector<double> rho(n_samples);
  std::vector<double> done_at(n_samples);
  parallel_for(n_samples, exec, [&](std::size_t i) {
    const auto r = obj.rho0(sample_plan(problem, derive_seed(seed, i)));
    rho[i] = r ? *r : std::numeric_limits<double>::infinity();
    done_at[i] = detail::seconds_since(t0);
  });

  std::size_t best = 0;
  detail::TraceBuilder trace;
  for (std::size_t i = 0; i < n_samples; ++i) {
    if (rho[i] < rho[best]) best = i;
    trace.add(i + 1, done_at[i], rho[i]);
  }
  if (!std::isfinite(rho[best])) {
    throw Unidentifiable("random_search: all " + std::to_string(n_samples) +
                         " sampled plans are unidentifiable");
  }
  DesignReport report;
  report.strategy = Strategy::Random;
  report.seed = seed;
  report.options.random_samples = n_samples;
  report.best_plan = sample_plan(problem, derive_seed(seed, best));
  report.rho0_best = rho[best];
  report.summary = detail::summarize(rho);
  report.runs.push_back(RunRecord{0, seed, rho[0], rho[best], static_cast<int>(n_samples), n_samples, -1});
  report.trace = trace.take();
  report.evaluations = n_samples;
  return report;
}

DesignReport multi_start(const DesignProblem& problem, std::size_t n_starts, Strategy strategy,
                         std::uint64_t seed, const OptimizerOptions& options, const Execution& exec) {
  problem.validate();
  require_positive(n_starts, "multi_start: n_starts");
  std::vector<DesignReport> runs(n_starts);
  parallel_for(n_starts, exec, [&](std::size_t r) {
    const std::uint64_t s = derive_seed(seed, r);
    const Execution inner = Execution::serial();
    switch (strategy) {
      case Strategy::Random:
        runs[r] = random_search(problem, options.random_samples, s, inner);
        break;
      case Strategy::Gradient:
        runs[r] = single_gradient(problem, s, options.gradient);
        break;
      case Strategy::Genetic:
        runs[r] = genetic_search(problem, options.genetic, s, inner);
        break;
      case Strategy::Hybrid:
        runs[r] = hybrid_search(problem, options.genetic, options.gradient, s, inner);
        break;
    }
  });
  return merge_runs(strategy, seed, options, runs);
}

DesignReport hybrid_search(const DesignProblem& problem, const GeneticOptions& ga_options,
                           const GradientOptions& gradient_options, std::uint64_t seed,
                           const Execution& exec) {
  DesignReport ga = genetic_search(problem, ga_options, seed, exec);
  const PlanObjective obj(problem);
  const DesignSpace& space = obj.space();
  // Gradient starts: the best ceil(P/2) distinct members of the final
  // population (ranked best first); duplicates would repeat the same run.
  const std::size_t half = std::max<std::size_t>(1, (ga.final_population.size() + 1) / 2);
  std::vector<std::size_t> picks;
  for (std::size_t i = 0; i < ga.final_population.size() && picks.size() < half; ++i) {
    const VecX& x = ga.final_population[i].x;
    const bool seen = std::any_of(picks.begin(), picks.end(),
                                  [&](std::size_t j) { return ga.final_population[j].x == x; });
    if (!seen) picks.push_back(i);
  }
  const std::size_t runs = picks.size();
  const std::uint64_t repair_seed = derive_seed(seed, std::numeric_limits<std::uint64_t>::max() - 1);

  std::vector<GradientResult> results(runs);
  std::vector<double> starts(runs);
  parallel_for(runs, exec, [&](std::size_t i) {
    const Individual& ind = ga.final_population[picks[i]];
    VecX x = ind.x;
    if (!ind.feasible) x = repair_plan(problem, obj, std::move(x), derive_seed(repair_seed, i));
    const ExperimentPlan start = space.decode(x);
    results[i] = gradient_search(problem, start, gradient_options);
    starts[i] = results[i].start_objective;
  });

  DesignReport report;
  report.strategy = Strategy::Hybrid;
  report.seed = seed;
  report.options.genetic = ga_options;
  report.options.gradient = gradient_options;
  report.best_plan = ga.best_plan;
  report.rho0_best = ga.rho0_best;
  report.evaluations = ga.evaluations;
  detail::TraceBuilder trace;
  trace.append_run(ga.trace, 0);
  std::vector<double> finals;
  for (std::size_t i = 0; i < runs; ++i) {
    const auto& g = results[i];
    trace.append_run(g.trace, report.evaluations);
    report.evaluations += g.evaluations;
    finals.push_back(g.rho0);
    report.runs.push_back(RunRecord{i, seed, starts[i], g.rho0, g.iterations,
                                    g.evaluations, static_cast<int>(picks[i])});
    if (g.rho0 < report.rho0_best) {
      report.rho0_best = g.rho0;
      report.best_plan = g.plan;
    }
  }
  if (!std::isfinite(report.rho0_best)) {
    throw Unidentifiable("hybrid_search: no identifiable plan found");
  }
  report.summary = detail::summarize(finals);
  report.final_population = std::move(ga.final_population);
  report.trace = trace.take();
  return report;
}

DesignReport run_strategy(const DesignProblem& problem, Strategy strategy, std::uint64_t seed,
                          const OptimizerOptions& options, const Execution& exec) {
  DesignReport r;
  switch (strategy) {
    case Strategy::Random:
      r = random_search(problem, options.random_samples, seed, exec);
      break;
    case Strategy::Gradient:
      r = multi_start(problem, options.n_starts, Strategy::Gradient, seed, options, exec);
      break;
    case Strategy::Genetic:
      r = options.genetic_runs > 1
              ? multi_start(problem, options.genetic_runs, Strategy::Genetic, seed, options, exec)
              : genetic_search(problem, options.genetic, seed, exec);
      break;
    case Strategy::Hybrid:
      r = options.hybrid_runs > 1
              ? multi_start(problem, options.hybrid_runs, Strategy::Hybrid, seed, options, exec)
              : hybrid_search(problem, options.genetic, options.gradient, seed, exec);
      break;
  }
  r.options = options;
  return r;
}

DesignReport factorized_design(const DesignProblem& problem, std::size_t m0, std::size_t k,
                               Strategy strategy, std::uint64_t seed,
                               const OptimizerOptions& options, const Execution& exec) {
  if (m0 < 1 || k < 1 || m0 * k != problem.m) {
    throw InvalidInput("factorization " + std::to_string(m0) + "x" + std::to_string(k) +
                       " does not multiply to m = " + std::to_string(problem.m));
  }
  const DesignProblem sub = problem.with_size(m0);
  DesignReport r = run_strategy(sub, strategy, seed, options, exec);
  const Rho0Evaluator eval(problem.model, problem.mode, problem.mask, problem.test, problem.sigma);
  r.m0 = m0;
  r.k = k;
  r.rho0_sub = r.rho0_best;
  r.best_plan = r.best_plan.repeated(k);
  r.rho0_best = eval.evaluate(r.best_plan.configs);
  const double scale = 1.0 / std::sqrt(static_cast<double>(k));
  r.summary.min *= scale;
  r.summary.mean *= scale;
  r.summary.max *= scale;
  for (auto& rec : r.runs) {
    rec.start_rho0 *= scale;
    rec.final_rho0 *= scale;
  }
  for (auto& p : r.trace) p.best_rho0 *= scale;
  return r;
}

ComparisonTable compare_strategies(const DesignProblem& problem,
                                   std::span<const Factorization> factorizations,
                                   std::span<const Strategy> strategies, std::uint64_t seed,
                                   const OptimizerOptions& options, const Execution& exec) {
  for (const auto& f : factorizations) {
    if (f.m0 < 1 || f.k < 1 || f.m0 * f.k != problem.m) {
      throw InvalidInput("factorization " + std::to_string(f.m0) + "x" + std::to_string(f.k) +
                         " does not divide m = " + std::to_string(problem.m));
    }
  }
  ComparisonTable table;
  table.m = problem.m;
  table.seed = seed;
  for (Strategy s : strategies) {
    const std::size_t first = table.rows.size();
    for (const auto& f : factorizations) {
      const auto t0 = Clock::now();
      ComparisonRow row;
      row.strategy = s;
      row.m0 = f.m0;
      row.k = f.k;
      row.report = factorized_design(problem, f.m0, f.k, s, seed, options, exec);
      row.wall_s = detail::seconds_since(t0);
      row.rho0 = row.report.rho0_best;
      row.rho0_sub = row.report.rho0_sub;
      row.sqrt_k_residual =
          std::abs(row.rho0 * std::sqrt(static_cast<double>(f.k)) / row.rho0_sub - 1.0);
      row.summary = row.report.summary;
      row.evaluations = row.report.evaluations;
      table.rows.push_back(std::move(row));
    }
    double direct = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = first; i < table.rows.size(); ++i) {
      if (table.rows[i].k == 1) direct = table.rows[i].rho0;
    }
    for (std::size_t i = first; i < table.rows.size(); ++i) {
      table.rows[i].ratio_vs_direct = table.rows[i].rho0 / direct;
    }
  }
  return table;
}

}  // namespace posecal
