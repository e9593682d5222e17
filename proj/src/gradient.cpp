#include "posecal/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace posecal {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Tracks the best feasible point seen so far and the evaluation count.
struct Incumbent {
  VecX x;
  double rho0 = std::numeric_limits<double>::infinity();
  std::uint64_t evaluations = 0;
  std::vector<TracePoint> trace;
  Clock::time_point t0 = Clock::now();

  void offer(const VecX& y, const PlanObjective::Value& v) {
    ++evaluations;
    if (v.feasible() && v.rho0 && *v.rho0 < rho0) {
      rho0 = *v.rho0;
      x = y;
      trace.push_back({evaluations, seconds_since(t0), rho0});
    }
  }
};

bool poses_feasible(const PlanObjective& obj, const VecX& x) {
  for (std::size_t p = 0; p < obj.space().poses(); ++p) {
    if (obj.pose_max_constraint(x, p) > kFeasibilityTol) return false;
  }
  return true;
}

// Moves every violating pose of `x` back along the segment towards the same
// pose of the feasible reference, keeping the farthest feasible point found
// by bisection.
VecX pull_back(const PlanObjective& obj, const VecX& feasible_ref, VecX x) {
  constexpr int kBisections = 50;
  const DesignSpace& space = obj.space();
  const auto per = static_cast<Eigen::Index>(space.vars_per_pose());
  for (std::size_t p = 0; p < space.poses(); ++p) {
    if (obj.pose_max_constraint(x, p) <= kFeasibilityTol) continue;
    const Eigen::Index base = static_cast<Eigen::Index>(p) * per;
    const VecX from = feasible_ref.segment(base, per);
    const VecX to = x.segment(base, per);
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < kBisections; ++it) {
      const double mid = 0.5 * (lo + hi);
      x.segment(base, per) = from + mid * (to - from);
      if (obj.pose_max_constraint(x, p) <= kFeasibilityTol) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    x.segment(base, per) = from + lo * (to - from);
  }
  return x;
}

// rho0 + mu * Σ max(0, c)^2 over the non-joint constraints. The gradient
// differences rho0 and the raw constraint values separately and applies the
// chain rule to the penalty, so the kink of max(0, c)^2 at the boundary does
// not corrupt it.
class PenalizedObjective {
 public:
  PenalizedObjective(const PlanObjective& obj, Incumbent& inc) : obj_(obj), inc_(inc) {}

  void set_weight(double mu) { mu_ = mu; }

  double operator()(const VecX& x) const {
    const auto v = obj_.evaluate(x);
    inc_.offer(x, v);
    return v.rho0_or_inf() + mu_ * v.penalty;
  }

  VecX gradient(const VecX& x, double h) const {
    const DesignSpace& space = obj_.space();
    const std::size_t per = space.vars_per_pose();
    const double r0 = rho0_at(x);
    VecX g(x.size());
    VecX y = x;
    std::vector<VecX> c0(space.poses());
    for (std::size_t p = 0; p < space.poses(); ++p) c0[p] = pose_penalty_terms(x, p);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const std::size_t pose = static_cast<std::size_t>(i) / per;
      y[i] = x[i] + h;
      const double rp = rho0_at(y);
      const VecX cp = pose_penalty_terms(y, pose);
      y[i] = x[i] - h;
      const double rm = rho0_at(y);
      const VecX cm = pose_penalty_terms(y, pose);
      y[i] = x[i];

      double d_rho = 0.0;
      if (std::isfinite(rp) && std::isfinite(rm)) {
        d_rho = (rp - rm) / (2.0 * h);
      } else if (std::isfinite(rp) && std::isfinite(r0)) {
        d_rho = (rp - r0) / h;
      } else if (std::isfinite(rm) && std::isfinite(r0)) {
        d_rho = (r0 - rm) / h;
      }
      const VecX dc = (cp - cm) / (2.0 * h);
      const VecX active = c0[pose].cwiseMax(0.0);
      g[i] = d_rho + 2.0 * mu_ * active.dot(dc);
    }
    return g;
  }

 private:
  double rho0_at(const VecX& x) const {
    const auto v = obj_.evaluate(x);
    inc_.offer(x, v);
    return v.rho0_or_inf();
  }

  // Non-joint constraint values of one pose.
  VecX pose_penalty_terms(const VecX& x, std::size_t pose) const {
    const auto cv = obj_.evaluate_constraints(obj_.space().decode_pose(x, pose));
    const VecX flat = cv.flat();
    return flat.tail(flat.size() - cv.joint.size());
  }

  const PlanObjective& obj_;
  Incumbent& inc_;
  double mu_ = 1.0;
};

// Joint variables are box-constrained (projection); force angles are free.
struct Box {
  const DesignSpace& space;

  bool bounded(Eigen::Index i) const { return !space.is_angle(static_cast<std::size_t>(i)); }

  VecX project(VecX x) const {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (!bounded(i)) continue;
      const auto u = static_cast<std::size_t>(i);
      x[i] = std::clamp(x[i], space.lower(u), space.upper(u));
    }
    return x;
  }

  // Variables held at a bound by the gradient.
  std::vector<bool> fixed(const VecX& x, const VecX& g) const {
    std::vector<bool> out(static_cast<std::size_t>(x.size()), false);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (!bounded(i)) continue;
      const auto u = static_cast<std::size_t>(i);
      out[u] = (x[i] <= space.lower(u) && g[i] > 0.0) || (x[i] >= space.upper(u) && g[i] < 0.0);
    }
    return out;
  }
};

void continuous_descent(const PlanObjective& obj, const GradientOptions& opt, VecX x,
                        Incumbent& inc, GradientResult& result) {
  const Box box{obj.space()};
  PenalizedObjective phi(obj, inc);
  const Eigen::Index dim = x.size();
  constexpr double kArmijo = 1e-4;
  constexpr double kMaxMove = 0.5;  // rad per iteration

  double mu = opt.penalty_weight;
  for (int loop = 0; loop < opt.outer_loops; ++loop, mu *= opt.penalty_growth) {
    phi.set_weight(mu);
    std::vector<double> history;
    double f = phi(x);
    history.push_back(f);
    if (!std::isfinite(f)) {
      result.history.push_back(std::move(history));
      break;
    }
    VecX g = phi.gradient(x, opt.fd_step);
    MatX H = MatX::Identity(dim, dim);
    bool scaled = false;

    for (int it = 0; it < opt.max_inner_iterations; ++it) {
      ++result.iterations;
      const auto fixed = box.fixed(x, g);
      auto restrict = [&](VecX d) {
        for (Eigen::Index i = 0; i < dim; ++i) {
          if (fixed[static_cast<std::size_t>(i)]) d[i] = 0.0;
        }
        return d;
      };
      VecX d = restrict(-H * g);
      if (!(g.dot(d) < 0.0)) {
        H.setIdentity();
        scaled = false;
        d = restrict(-g);
        if (!(g.dot(d) < 0.0)) break;  // projected gradient vanishes
      }
      const double dmax = d.cwiseAbs().maxCoeff();
      double t = scaled ? 1.0 : 0.1 / dmax;
      t = std::min(t, kMaxMove / dmax);

      bool accepted = false;
      VecX x_new;
      double f_new = f;
      VecX s;
      while (true) {
        x_new = box.project(x + t * d);
        s = x_new - x;
        if (s.cwiseAbs().maxCoeff() < opt.step_tolerance) break;
        f_new = phi(x_new);
        if (std::isfinite(f_new) && f_new <= f + kArmijo * g.dot(s)) {
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) break;

      if (!poses_feasible(obj, x_new)) {
        const VecX y = pull_back(obj, inc.x, x_new);
        inc.offer(y, obj.evaluate(y));
      }
      const VecX g_new = phi.gradient(x_new, opt.fd_step);
      const VecX y = g_new - g;
      const double sy = s.dot(y);
      if (sy > 1e-12 * s.norm() * y.norm()) {
        if (!scaled) {
          H = MatX::Identity(dim, dim) * (sy / y.squaredNorm());
          scaled = true;
        }
        const double rho = 1.0 / sy;
        const VecX Hy = H * y;
        // BFGS inverse-Hessian update.
        H += (rho * rho * y.dot(Hy) + rho) * (s * s.transpose()) -
             rho * (Hy * s.transpose() + s * Hy.transpose());
      }
      x = x_new;
      f = f_new;
      g = g_new;
      history.push_back(f);
      if (s.cwiseAbs().maxCoeff() < opt.step_tolerance) break;
    }
    result.history.push_back(std::move(history));
  }
}

std::size_t level_index(const std::vector<double>& levels, double value) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < levels.size(); ++j) {
    if (std::abs(levels[j] - value) < std::abs(levels[best] - value)) best = j;
  }
  return best;
}

void lattice_descent(const PlanObjective& obj, const GradientOptions& opt, VecX x, Incumbent& inc,
                     GradientResult& result) {
  const DesignSpace& space = obj.space();
  const auto& levels = space.lattice()->levels;
  double f = inc.rho0;
  std::vector<double> history{f};
  const int max_moves = opt.outer_loops * opt.max_inner_iterations;
  for (int it = 0; it < max_moves; ++it) {
    ++result.iterations;
    VecX best_y;
    double best_f = f;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const auto& lv = levels[static_cast<std::size_t>(i) % space.vars_per_pose()];
      const std::size_t idx = level_index(lv, x[i]);
      for (int step : {-1, 1}) {
        if ((step < 0 && idx == 0) || (step > 0 && idx + 1 >= lv.size())) continue;
        VecX y = x;
        y[i] = lv[static_cast<std::size_t>(static_cast<long>(idx) + step)];
        const auto v = obj.evaluate(y);
        inc.offer(y, v);
        if (v.feasible() && v.rho0 && *v.rho0 < best_f) {
          best_f = *v.rho0;
          best_y = y;
        }
      }
    }
    if (best_y.size() == 0) break;
    x = best_y;
    f = best_f;
    history.push_back(f);
  }
  result.history.push_back(std::move(history));
}

}  // namespace

GradientResult gradient_search(const DesignProblem& problem, const ExperimentPlan& start,
                               const GradientOptions& options) {
  problem.validate();
  if (start.mode != problem.mode) throw InvalidInput("start plan mode does not match problem");
  if (options.fd_step <= 0.0 || options.outer_loops < 1 || options.max_inner_iterations < 1) {
    throw InvalidInput("invalid gradient search options");
  }
  const PlanObjective obj(problem);
  const DesignSpace& space = obj.space();
  VecX x = space.snap(space.encode(start));

  Incumbent inc;
  inc.x = x;
  const auto v0 = obj.evaluate(x);
  ++inc.evaluations;
  if (!v0.feasible()) {
    std::ostringstream os;
    os << "gradient_search: start plan violates constraints (max constraint value "
       << v0.max_constraint << ")";
    throw InvalidInput(os.str());
  }
  inc.rho0 = v0.rho0_or_inf();
  inc.trace.push_back({inc.evaluations, 0.0, inc.rho0});

  GradientResult result;
  result.start_objective = inc.rho0;
  if (std::isfinite(inc.rho0)) {
    if (space.lattice()) {
      lattice_descent(obj, options, x, inc, result);
    } else {
      continuous_descent(obj, options, x, inc, result);
    }
  }
  result.plan = space.decode(inc.x);
  result.x = space.lattice() ? inc.x : space.encode(result.plan);
  result.rho0 = inc.rho0;
  result.final_objective = inc.rho0;
  result.evaluations = inc.evaluations;
  result.trace = std::move(inc.trace);
  return result;
}

}  // namespace posecal
