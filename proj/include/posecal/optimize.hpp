#pragma once

#include "posecal/constraints.hpp"
#include "posecal/criterion.hpp"
#include "posecal/model.hpp"
#include "posecal/parallel.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace posecal {

enum class Strategy { Random, Gradient, Genetic, Hybrid };

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view text);

// Finite design domain: the admissible values of every per-pose variable.
// When a problem carries a lattice every strategy searches only lattice
// points, which makes exhaustive enumeration an exact oracle.
struct Lattice {
  std::vector<std::vector<double>> levels;  // one ascending list per pose variable

  // `count` evenly spaced levels across each [lo, hi], endpoints included.
  static Lattice uniform(std::span<const std::pair<double, double>> bounds, int count);
};

// Pose-selection problem: choose m configurations minimizing rho0.
// Per-pose decision variables: q (n joints), followed in loaded modes by the
// polar and azimuth angles of the force direction. The force magnitude is
// fixed at F_max and the torque is zero.
struct DesignProblem {
  RobotModel model;
  CalibrationMode mode = CalibrationMode::Geometric;
  ParamMask mask;
  TestPoseSet test;
  double sigma = kDefaultSigma;
  ConstraintSet constraints;
  std::size_t m = 1;
  std::optional<Lattice> lattice;

  // Throws InvalidInput, or Unidentifiable when 3m < active parameters.
  void validate() const;
  DesignProblem with_size(std::size_t new_m) const;
};

// Decision-vector bookkeeping for a problem.
class DesignSpace {
 public:
  explicit DesignSpace(const DesignProblem& problem);

  std::size_t vars_per_pose() const { return per_pose_; }
  std::size_t dim() const { return per_pose_ * m_; }
  std::size_t poses() const { return m_; }
  double lower(std::size_t i) const { return lower_[i % per_pose_]; }
  double upper(std::size_t i) const { return upper_[i % per_pose_]; }
  // Angle variables of the force direction.
  bool is_angle(std::size_t i) const { return i % per_pose_ >= n_joints_; }

  MeasurementConfig decode_pose(const VecX& x, std::size_t pose) const;
  ExperimentPlan decode(const VecX& x) const;
  VecX encode(const ExperimentPlan& plan) const;

  VecX clamp(VecX x) const;
  // Nearest lattice level per variable (identity without lattice).
  VecX snap(VecX x) const;
  const Lattice* lattice() const { return lattice_; }

 private:
  CalibrationMode mode_;
  std::size_t n_joints_;
  std::size_t per_pose_;
  std::size_t m_;
  double force_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  const Lattice* lattice_;
};

// rho0 plus constraint status of a decision vector.
class PlanObjective {
 public:
  explicit PlanObjective(const DesignProblem& problem);

  struct Value {
    std::optional<double> rho0;  // nullopt: unidentifiable
    double penalty = 0.0;        // Σ max(0, c)^2 over non-joint constraints
    double violation = 0.0;      // Σ max(0, c) over all constraints
    double max_constraint = 0.0;

    bool feasible() const { return max_constraint <= kFeasibilityTol; }
    double rho0_or_inf() const;
  };

  Value evaluate(const VecX& x) const;
  ConstraintValues evaluate_constraints(const MeasurementConfig& config) const;
  double pose_max_constraint(const VecX& x, std::size_t pose) const;
  std::optional<double> rho0(const ExperimentPlan& plan) const;

  const DesignProblem& problem() const { return *problem_; }
  const DesignSpace& space() const { return space_; }
  const Rho0Evaluator& evaluator() const { return evaluator_; }

 private:
  const DesignProblem* problem_;
  DesignSpace space_;
  Rho0Evaluator evaluator_;
};

struct GradientOptions {
  double fd_step = 1e-5;           // central finite differences [rad]
  double penalty_weight = 1.0;     // initial exterior penalty weight
  double penalty_growth = 10.0;    // weight multiplier per outer loop
  int outer_loops = 4;
  int max_inner_iterations = 200;
  double step_tolerance = 1e-8;
};

struct GeneticOptions {
  std::size_t population = 50;
  std::size_t generations = 20;
  std::size_t tournament = 2;
  double crossover_rate = 0.9;
  double mutation_scale = 0.05;  // fraction of each variable's range
  double mutation_rate = 0.0;    // per gene; 0 selects 1/dim
  std::size_t elites = 1;
};

struct OptimizerOptions {
  std::size_t random_samples = 10000;
  std::size_t n_starts = 20;
  // Independent GA / hybrid runs per strategy call (best reported).
  std::size_t genetic_runs = 1;
  std::size_t hybrid_runs = 1;
  GradientOptions gradient;
  GeneticOptions genetic;
};

struct TracePoint {
  std::uint64_t evaluations = 0;
  double elapsed_s = 0.0;  // wall clock, informational only
  double best_rho0 = 0.0;
};

struct RunRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double start_rho0 = 0.0;
  double final_rho0 = 0.0;
  int iterations = 0;
  std::uint64_t evaluations = 0;
  int parent = -1;  // GA population rank of the start (hybrid only)
};

struct Summary {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
  std::size_t count = 0;
  std::size_t unidentifiable = 0;
};

struct Individual {
  VecX x;
  double rho0 = 0.0;  // +inf when unidentifiable
  double violation = 0.0;
  bool feasible = false;
};

struct DesignReport {
  Strategy strategy = Strategy::Random;
  std::uint64_t seed = 0;
  OptimizerOptions options;
  ExperimentPlan best_plan;
  double rho0_best = 0.0;
  Summary summary;
  std::vector<RunRecord> runs;
  std::vector<TracePoint> trace;  // best-so-far, non-increasing
  std::vector<Individual> final_population;  // GA and hybrid, sorted best first
  std::uint64_t evaluations = 0;
  // Factorized designs: m = m0 * k, best_plan is the k-fold repeated plan.
  std::size_t m0 = 0;
  std::size_t k = 1;
  double rho0_sub = 0.0;
};

struct GradientResult {
  ExperimentPlan plan;
  VecX x;
  double rho0 = 0.0;
  double start_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  std::uint64_t evaluations = 0;
  // Accepted penalized objective values, one list per outer loop.
  std::vector<std::vector<double>> history;
  std::vector<TracePoint> trace;
};

// Random feasible plan of problem.m poses, deterministic in the seed.
ExperimentPlan sample_plan(const DesignProblem& problem, std::uint64_t seed);

// Local search from a feasible start. Continuous problems: quasi-Newton
// descent on rho0 + exterior quadratic penalty with finite-difference
// gradients and joint limits enforced by projection. Lattice problems:
// best-improvement descent over neighbouring lattice levels. The returned
// plan is feasible and never worse than the start.
GradientResult gradient_search(const DesignProblem& problem, const ExperimentPlan& start,
                               const GradientOptions& options = {});

DesignReport random_search(const DesignProblem& problem, std::size_t n_samples,
                           std::uint64_t seed, const Execution& exec = {});

DesignReport multi_start(const DesignProblem& problem, std::size_t n_starts, Strategy strategy,
                         std::uint64_t seed, const OptimizerOptions& options = {},
                         const Execution& exec = {});

DesignReport genetic_search(const DesignProblem& problem, const GeneticOptions& options,
                            std::uint64_t seed, const Execution& exec = {},
                            std::span<const ExperimentPlan> initial = {});

DesignReport hybrid_search(const DesignProblem& problem, const GeneticOptions& ga_options,
                           const GradientOptions& gradient_options, std::uint64_t seed,
                           const Execution& exec = {});

// One strategy run with the budgets in `options`.
DesignReport run_strategy(const DesignProblem& problem, Strategy strategy, std::uint64_t seed,
                          const OptimizerOptions& options, const Execution& exec = {});

DesignReport factorized_design(const DesignProblem& problem, std::size_t m0, std::size_t k,
                               Strategy strategy, std::uint64_t seed,
                               const OptimizerOptions& options = {}, const Execution& exec = {});

struct Factorization {
  std::size_t m0 = 0;
  std::size_t k = 1;
};

struct ComparisonRow {
  Strategy strategy = Strategy::Random;
  std::size_t m0 = 0;
  std::size_t k = 1;
  double rho0 = 0.0;      // full repeated plan
  double rho0_sub = 0.0;  // m0-pose subproblem
  double sqrt_k_residual = 0.0;  // |rho0 * sqrt(k) / rho0_sub - 1|
  Summary summary;        // per-run values for the repeated plan
  double ratio_vs_direct = 0.0;  // rho0 / rho0(k = 1 row of the same strategy); NaN if absent
  double wall_s = 0.0;
  std::uint64_t evaluations = 0;
  DesignReport report;
};

struct ComparisonTable {
  std::size_t m = 0;
  std::uint64_t seed = 0;
  std::vector<ComparisonRow> rows;
};

ComparisonTable compare_strategies(const DesignProblem& problem,
                                   std::span<const Factorization> factorizations,
                                   std::span<const Strategy> strategies, std::uint64_t seed,
                                   const OptimizerOptions& options = {},
                                   const Execution& exec = {});

}  // namespace posecal
