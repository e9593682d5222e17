#include "posecal/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace posecal {

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::Random: return "random";
    case Strategy::Gradient: return "gradient";
    case Strategy::Genetic: return "genetic";
    case Strategy::Hybrid: return "hybrid";
  }
  return "?";
}

Strategy parse_strategy(std::string_view text) {
  if (text == "random") return Strategy::Random;
  if (text == "gradient") return Strategy::Gradient;
  if (text == "genetic") return Strategy::Genetic;
  if (text == "hybrid") return Strategy::Hybrid;
  throw InvalidInput("unknown strategy '" + std::string(text) +
                     "' (expected random, gradient, genetic or hybrid)");
}

Lattice Lattice::uniform(std::span<const std::pair<double, double>> bounds, int count) {
  if (count < 1) throw InvalidInput("lattice needs at least one level per variable");
  Lattice lat;
  for (const auto& [lo, hi] : bounds) {
    std::vector<double> levels;
    if (count == 1) {
      levels.push_back(0.5 * (lo + hi));
    } else {
      for (int i = 0; i < count; ++i) levels.push_back(lo + (hi - lo) * i / (count - 1));
    }
    lat.levels.push_back(std::move(levels));
  }
  return lat;
}

void DesignProblem::validate() const {
  const std::size_t n = model.n_joints();
  if (mask.size() != model.n_params()) throw InvalidInput("mask does not match model");
  if (mask.count() == 0) throw InvalidInput("mask selects no parameters");
  if (m < 1) throw InvalidInput("number of configurations m must be >= 1");
  if (!(sigma >= 0.0)) throw InvalidInput("sigma must be >= 0");
  constraints.validate(n);
  if (test.poses.empty()) throw InvalidInput("test-pose set is empty");
  for (const auto& pose : test.poses) {
    if (static_cast<std::size_t>(pose.q.size()) != n) throw InvalidInput("test pose joint count mismatch");
    if (needs_wrench(mode) && !pose.wrench) {
      throw InvalidInput("test poses need a wrench in " + std::string(to_string(mode)) + " mode");
    }
  }
  if (lattice) {
    const std::size_t per_pose = n + (needs_wrench(mode) ? 2 : 0);
    if (lattice->levels.size() != per_pose) {
      throw InvalidInput("lattice has " + std::to_string(lattice->levels.size()) +
                         " variables per pose, expected " + std::to_string(per_pose));
    }
    for (const auto& lv : lattice->levels) {
      if (lv.empty() || !std::is_sorted(lv.begin(), lv.end())) {
        throw InvalidInput("lattice levels must be non-empty and ascending");
      }
    }
  }
  const std::size_t min_m = (mask.count() + 2) / 3;
  if (m < min_m) {
    throw Unidentifiable("unidentifiable design: " + std::to_string(m) +
                         " configuration(s) give " + std::to_string(3 * m) +
                         " scalar observations for " + std::to_string(mask.count()) +
                         " active parameters; need m >= " + std::to_string(min_m));
  }
}

DesignProblem DesignProblem::with_size(std::size_t new_m) const {
  DesignProblem p = *this;
  p.m = new_m;
  return p;
}

DesignSpace::DesignSpace(const DesignProblem& problem)
    : mode_(problem.mode),
      n_joints_(problem.model.n_joints()),
      per_pose_(problem.model.n_joints() + (needs_wrench(problem.mode) ? 2 : 0)),
      m_(problem.m),
      force_(problem.constraints.payload_limit),
      lattice_(problem.lattice ? &*problem.lattice : nullptr) {
  for (const auto& lim : problem.constraints.joint_limits) {
    lower_.push_back(lim.lower);
    upper_.push_back(lim.upper);
  }
  if (needs_wrench(mode_)) {
    lower_.push_back(0.0);
    upper_.push_back(kPi);
    lower_.push_back(-kPi);
    upper_.push_back(kPi);
  }
  if (lower_.size() != per_pose_) throw InvalidInput("constraint set does not match model");
}

MeasurementConfig DesignSpace::decode_pose(const VecX& x, std::size_t pose) const {
  const auto base = static_cast<Eigen::Index>(pose * per_pose_);
  MeasurementConfig c;
  c.q = x.segment(base, static_cast<Eigen::Index>(n_joints_));
  if (needs_wrench(mode_)) {
    const auto a = base + static_cast<Eigen::Index>(n_joints_);
    c.wrench = wrench_from_direction(force_, x[a], x[a + 1]);
  }
  return c;
}

ExperimentPlan DesignSpace::decode(const VecX& x) const {
  if (static_cast<std::size_t>(x.size()) != dim()) throw InvalidInput("decision vector has wrong length");
  ExperimentPlan plan{mode_, {}};
  plan.configs.reserve(m_);
  for (std::size_t p = 0; p < m_; ++p) plan.configs.push_back(decode_pose(x, p));
  return plan;
}

VecX DesignSpace::encode(const ExperimentPlan& plan) const {
  if (plan.size() != m_) {
    throw InvalidInput("plan has " + std::to_string(plan.size()) + " configurations, problem has " +
                       std::to_string(m_));
  }
  VecX x(static_cast<Eigen::Index>(dim()));
  for (std::size_t p = 0; p < m_; ++p) {
    const auto& c = plan.configs[p];
    if (static_cast<std::size_t>(c.q.size()) != n_joints_) throw InvalidInput("plan joint count mismatch");
    const auto base = static_cast<Eigen::Index>(p * per_pose_);
    x.segment(base, static_cast<Eigen::Index>(n_joints_)) = c.q;
    if (needs_wrench(mode_)) {
      const Vec3 f = c.wrench ? Vec3(c.wrench->head<3>()) : Vec3::Zero();
      const double norm = f.norm();
      const auto a = base + static_cast<Eigen::Index>(n_joints_);
      x[a] = norm > 0.0 ? std::acos(std::clamp(f.z() / norm, -1.0, 1.0)) : 0.0;
      x[a + 1] = norm > 0.0 ? std::atan2(f.y(), f.x()) : 0.0;
    }
  }
  return x;
}

VecX DesignSpace::clamp(VecX x) const {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    x[i] = std::clamp(x[i], lower(u), upper(u));
  }
  return x;
}

VecX DesignSpace::snap(VecX x) const {
  if (!lattice_) return x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const auto& lv = lattice_->levels[static_cast<std::size_t>(i) % per_pose_];
    auto it = std::lower_bound(lv.begin(), lv.end(), x[i]);
    if (it == lv.end()) {
      x[i] = lv.back();
    } else if (it == lv.begin()) {
      x[i] = lv.front();
    } else {
      x[i] = (x[i] - *(it - 1) <= *it - x[i]) ? *(it - 1) : *it;
    }
  }
  return x;
}

double PlanObjective::Value::rho0_or_inf() const {
  return rho0 ? *rho0 : std::numeric_limits<double>::infinity();
}

PlanObjective::PlanObjective(const DesignProblem& problem)
    : problem_(&problem),
      space_(problem),
      evaluator_(problem.model, problem.mode, problem.mask, problem.test, problem.sigma) {}

double PlanObjective::pose_max_constraint(const VecX& x, std::size_t pose) const {
  const auto c = space_.decode_pose(x, pose);
  return evaluate_constraints(c).max();
}

ConstraintValues PlanObjective::evaluate_constraints(const MeasurementConfig& c) const {
  return posecal::evaluate(problem_->model, c, problem_->constraints, problem_->mode);
}

PlanObjective::Value PlanObjective::evaluate(const VecX& x) const {
  const ExperimentPlan plan = space_.decode(x);
  Value v;
  v.max_constraint = -std::numeric_limits<double>::infinity();
  for (const auto& c : plan.configs) {
    const ConstraintValues cv = evaluate_constraints(c);
    const VecX flat = cv.flat();
    const auto n_joint = cv.joint.size();
    for (Eigen::Index j = 0; j < flat.size(); ++j) {
      const double pos = std::max(flat[j], 0.0);
      v.violation += pos;
      if (j >= n_joint) v.penalty += pos * pos;
    }
    v.max_constraint = std::max(v.max_constraint, cv.max());
  }
  v.rho0 = evaluator_.try_evaluate(plan.configs);
  return v;
}

std::optional<double> PlanObjective::rho0(const ExperimentPlan& plan) const {
  return evaluator_.try_evaluate(plan.configs);
}

namespace {

constexpr std::uint64_t kMaxLatticeRejections = 1'000'000;

MeasurementConfig sample_lattice_pose(const DesignProblem& problem, const DesignSpace& space,
                                      std::mt19937_64& rng) {
  const auto& levels = space.lattice()->levels;
  VecX x(static_cast<Eigen::Index>(space.vars_per_pose()));
  const DesignSpace one_pose(problem.with_size(1));
  for (std::uint64_t attempt = 0; attempt < kMaxLatticeRejections; ++attempt) {
    for (std::size_t v = 0; v < levels.size(); ++v) {
      std::uniform_int_distribution<std::size_t> pick(0, levels[v].size() - 1);
      x[static_cast<Eigen::Index>(v)] = levels[v][pick(rng)];
    }
    MeasurementConfig c = one_pose.decode_pose(x, 0);
    if (evaluate(problem.model, c, problem.constraints, problem.mode).max() <= kFeasibilityTol) {
      return c;
    }
  }
  throw InfeasibleProblem("no feasible lattice configuration found after " +
                          std::to_string(kMaxLatticeRejections) + " consecutive samples");
}

}  // namespace

ExperimentPlan sample_plan(const DesignProblem& problem, std::uint64_t seed) {
  ExperimentPlan plan{problem.mode, {}};
  plan.configs.reserve(problem.m);
  if (problem.lattice) {
    const DesignSpace space(problem);
    std::mt19937_64 rng(seed);
    for (std::size_t p = 0; p < problem.m; ++p) plan.configs.push_back(sample_lattice_pose(problem, space, rng));
  } else {
    FeasibleSampler sampler(problem.model, problem.constraints, problem.mode, seed);
    for (std::size_t p = 0; p < problem.m; ++p) plan.configs.push_back(sampler.next());
  }
  return plan;
}

}  // namespace posecal
