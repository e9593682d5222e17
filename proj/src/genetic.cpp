#include "posecal/optimize.hpp"

#include "search_common.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace posecal {

namespace {

Individual assess(const PlanObjective& obj, VecX x) {
  const auto v = obj.evaluate(x);
  return Individual{std::move(x), v.rho0_or_inf(), v.violation, v.feasible()};
}

class Breeder {
 public:
  Breeder(const PlanObjective& obj, const GeneticOptions& opt, std::uint64_t seed)
      : obj_(obj), space_(obj.space()), opt_(opt), rng_(seed) {
    const double dim = static_cast<double>(space_.dim());
    rate_ = opt.mutation_rate > 0.0 ? opt.mutation_rate : 1.0 / dim;
  }

  std::size_t tournament(const std::vector<Individual>& pop) {
    std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
    std::size_t best = pick(rng_);
    for (std::size_t t = 1; t < opt_.tournament; ++t) {
      const std::size_t c = pick(rng_);
      if (detail::better(pop[c], pop[best])) best = c;
    }
    return best;
  }

  void crossover(VecX& a, VecX& b) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng_) >= opt_.crossover_rate) return;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (u(rng_) < 0.5) std::swap(a[i], b[i]);
    }
  }

  void mutate(VecX& x) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (u(rng_) >= rate_) continue;
      const auto ui = static_cast<std::size_t>(i);
      if (const Lattice* lat = space_.lattice()) {
        const auto& lv = lat->levels[ui % space_.vars_per_pose()];
        std::uniform_int_distribution<std::size_t> pick(0, lv.size() - 1);
        x[i] = lv[pick(rng_)];
      } else {
        x[i] += g(rng_) * opt_.mutation_scale * (space_.upper(ui) - space_.lower(ui));
      }
    }
  }

  // Clamp to the variable bounds; in loaded modes re-draw the force direction
  // of any pose that still violates its constraints.
  void repair(VecX& x) {
    x = space_.snap(space_.clamp(std::move(x)));
    if (space_.vars_per_pose() == static_cast<std::size_t>(obj_.problem().model.n_joints())) return;
    constexpr int kRedraws = 10;
    const std::size_t n = obj_.problem().model.n_joints();
    for (std::size_t p = 0; p < space_.poses(); ++p) {
      if (obj_.pose_max_constraint(x, p) <= kFeasibilityTol) continue;
      const auto a = static_cast<Eigen::Index>(p * space_.vars_per_pose() + n);
      const double keep_polar = x[a], keep_azimuth = x[a + 1];
      bool fixed = false;
      for (int r = 0; r < kRedraws && !fixed; ++r) {
        draw_direction(x, a);
        fixed = obj_.pose_max_constraint(x, p) <= kFeasibilityTol;
      }
      if (!fixed) {
        x[a] = keep_polar;
        x[a + 1] = keep_azimuth;
      }
    }
  }

 private:
  void draw_direction(VecX& x, Eigen::Index a) {
    if (const Lattice* lat = space_.lattice()) {
      const std::size_t n = obj_.problem().model.n_joints();
      for (std::size_t v = 0; v < 2; ++v) {
        const auto& lv = lat->levels[n + v];
        std::uniform_int_distribution<std::size_t> pick(0, lv.size() - 1);
        x[a + static_cast<Eigen::Index>(v)] = lv[pick(rng_)];
      }
      return;
    }
    std::normal_distribution<double> g(0.0, 1.0);
    Vec3 dir;
    do {
      dir = Vec3(g(rng_), g(rng_), g(rng_));
    } while (dir.norm() < 1e-12);
    dir.normalize();
    x[a] = std::acos(std::clamp(dir.z(), -1.0, 1.0));
    x[a + 1] = std::atan2(dir.y(), dir.x());
  }

  const PlanObjective& obj_;
  const DesignSpace& space_;
  const GeneticOptions& opt_;
  std::mt19937_64 rng_;
  double rate_ = 0.0;
};

}  // namespace

DesignReport genetic_search(const DesignProblem& problem, const GeneticOptions& options,
                            std::uint64_t seed, const Execution& exec,
                            std::span<const ExperimentPlan> initial) {
  problem.validate();
  if (options.population < 2) throw InvalidInput("genetic_search: population must be >= 2");
  if (options.tournament < 1) throw InvalidInput("genetic_search: tournament size must be >= 1");
  if (options.elites >= options.population) throw InvalidInput("genetic_search: too many elites");
  if (initial.size() > options.population) {
    throw InvalidInput("genetic_search: more initial plans than population slots");
  }
  const auto t0 = detail::Clock::now();
  const PlanObjective obj(problem);
  const DesignSpace& space = obj.space();
  const std::size_t P = options.population;

  std::vector<Individual> pop(P);
  parallel_for(P, exec, [&](std::size_t i) {
    const ExperimentPlan plan =
        i < initial.size() ? initial[i] : sample_plan(problem, derive_seed(seed, i));
    pop[i] = assess(obj, space.snap(space.encode(plan)));
  });
  std::uint64_t evaluations = P;

  DesignReport report;
  report.strategy = Strategy::Genetic;
  report.seed = seed;
  report.options.genetic = options;

  detail::TraceBuilder trace;
  const auto best_of = [](const std::vector<Individual>& v) {
    return *std::min_element(v.begin(), v.end(), detail::better);
  };
  const auto record = [&] {
    const Individual best = best_of(pop);
    if (best.feasible) trace.add(evaluations, detail::seconds_since(t0), best.rho0);
  };
  record();
  const double initial_best = best_of(pop).rho0;

  Breeder breeder(obj, options, derive_seed(seed, std::numeric_limits<std::uint64_t>::max()));
  for (std::size_t gen = 0; gen < options.generations; ++gen) {
    const auto order = detail::ranking(pop);
    std::vector<Individual> next;
    next.reserve(P);
    for (std::size_t e = 0; e < options.elites; ++e) next.push_back(pop[order[e]]);

    std::vector<VecX> children;
    children.reserve(P - options.elites);
    while (children.size() < P - options.elites) {
      VecX a = pop[breeder.tournament(pop)].x;
      VecX b = pop[breeder.tournament(pop)].x;
      breeder.crossover(a, b);
      breeder.mutate(a);
      breeder.mutate(b);
      breeder.repair(a);
      breeder.repair(b);
      children.push_back(std::move(a));
      if (children.size() < P - options.elites) children.push_back(std::move(b));
    }
    std::vector<Individual> assessed(children.size());
    parallel_for(children.size(), exec,
                 [&](std::size_t i) { assessed[i] = assess(obj, std::move(children[i])); });
    evaluations += assessed.size();
    for (auto& ind : assessed) next.push_back(std::move(ind));
    pop = std::move(next);
    record();
  }

  const auto order = detail::ranking(pop);
  for (auto i : order) report.final_population.push_back(pop[i]);
  const Individual& best = report.final_population.front();
  if (!best.feasible) throw InfeasibleProblem("genetic_search: no feasible individual in final population");
  if (!std::isfinite(best.rho0)) {
    throw Unidentifiable("genetic_search: every feasible plan in the final population is unidentifiable");
  }
  report.best_plan = space.decode(best.x);
  report.rho0_best = best.rho0;
  std::vector<double> finals;
  for (const auto& ind : report.final_population) {
    if (ind.feasible) finals.push_back(ind.rho0);
  }
  report.summary = detail::summarize(finals);
  report.runs.push_back(RunRecord{0, seed, initial_best, best.rho0,
                                  static_cast<int>(options.generations), evaluations, -1});
  report.trace = trace.take();
  report.evaluations = evaluations;
  return report;
}

}  // namespace posecal
