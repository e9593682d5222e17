#pragma once

// Test fixtures and independent reference implementations.

#include "posecal/constraints.hpp"
#include "posecal/criterion.hpp"
#include "posecal/model.hpp"
#include "posecal/optimize.hpp"
#include "posecal/presets.hpp"
#include "posecal/regression.hpp"

#include <Eigen/LU>

#include <cmath>
#include <initializer_list>
#include <limits>
#include <random>
#include <vector>

namespace posecal::testing {

inline VecX qv(std::initializer_list<double> values) {
  VecX q(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) q[i++] = v;
  return q;
}

inline RobotModel planar_2r() { return presets::planar_2r(); }

inline RobotModel single_joint(double radius) {
  return RobotModel({Link{0.0, radius, 0.0, 0.0, LengthAxis::A}}, {JointLimit{-kPi, kPi}}, 100.0);
}

inline VecX random_q(const RobotModel& model, std::mt19937_64& rng) {
  VecX q(static_cast<Eigen::Index>(model.n_joints()));
  for (std::size_t i = 0; i < model.n_joints(); ++i) {
    std::uniform_real_distribution<double> u(model.limits()[i].lower, model.limits()[i].upper);
    q[static_cast<Eigen::Index>(i)] = u(rng);
  }
  return q;
}

inline Vec6 random_wrench(std::mt19937_64& rng, double force = 1000.0, double torque = 0.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec6 w;
  for (int i = 0; i < 6; ++i) w[i] = n(rng);
  w.head<3>() *= force / w.head<3>().norm();
  w.tail<3>() *= torque / w.tail<3>().norm();
  return w;
}

// Unconstrained random plan (no feasibility requirement).
inline ExperimentPlan random_plan(const RobotModel& model, CalibrationMode mode, std::size_t m,
                                  std::mt19937_64& rng) {
  ExperimentPlan plan{mode, {}};
  for (std::size_t i = 0; i < m; ++i) {
    MeasurementConfig c{random_q(model, rng), std::nullopt};
    if (needs_wrench(mode)) c.wrench = random_wrench(rng, model.payload_limit(), 50.0);
    plan.configs.push_back(std::move(c));
  }
  return plan;
}

inline ParamVector random_delta(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ParamVector d(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.dl(i) = 2.0 * u(rng);
    d.dq(i) = 0.002 * u(rng);
    d.k(i) = 1e-6 * (1.5 + u(rng));
  }
  return d;
}

// Explicit product of 4x4 homogeneous DH transforms, written out entry by
// entry so it shares no code with the library kinematics.
inline Eigen::Matrix4d oracle_transform(const RobotModel& model, const VecX& q,
                                        const ParamVector* delta = nullptr) {
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  for (std::size_t i = 0; i < model.n_joints(); ++i) {
    const Link& l = model.links()[i];
    double th = l.theta + q[static_cast<Eigen::Index>(i)];
    double a = l.a;
    double d = l.d;
    if (delta) {
      th += delta->dq(i);
      (l.length_axis == LengthAxis::A ? a : d) += delta->dl(i);
    }
    const double ct = std::cos(th), st = std::sin(th);
    const double ca = std::cos(l.alpha), sa = std::sin(l.alpha);
    Eigen::Matrix4d A;
    A << ct, -st * ca, st * sa, a * ct,
         st, ct * ca, -ct * sa, a * st,
         0.0, sa, ca, d,
         0.0, 0.0, 0.0, 1.0;
    T = T * A;
  }
  return T;
}

inline Vec3 oracle_fk(const RobotModel& model, const VecX& q, const ParamVector* delta = nullptr) {
  const Eigen::Vector4d tool(model.tool().x(), model.tool().y(), model.tool().z(), 1.0);
  return (oracle_transform(model, q, delta) * tool).head<3>();
}

inline MatX fd_param_jacobian(const RobotModel& model, const VecX& q, double h = 1e-6) {
  const std::size_t n = model.n_joints();
  MatX J(3, static_cast<Eigen::Index>(2 * n));
  for (std::size_t j = 0; j < 2 * n; ++j) {
    ParamVector plus(n), minus(n);
    plus.values()[static_cast<Eigen::Index>(j)] = h;
    minus.values()[static_cast<Eigen::Index>(j)] = -h;
    J.col(static_cast<Eigen::Index>(j)) =
        (oracle_fk(model, q, &plus) - oracle_fk(model, q, &minus)) / (2.0 * h);
  }
  return J;
}

inline MatX fd_joint_jacobian(const RobotModel& model, const VecX& q, double h = 1e-6) {
  const auto n = static_cast<Eigen::Index>(model.n_joints());
  MatX J(3, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    VecX qp = q, qm = q;
    qp[j] += h;
    qm[j] -= h;
    J.col(j) = (oracle_fk(model, qp) - oracle_fk(model, qm)) / (2.0 * h);
  }
  return J;
}

// 6 x n central-difference Jacobian: position rows from oracle_fk, angular
// rows from the skew part of R(q + h e_j) R(q - h e_j)^T.
inline MatX fd_full_joint_jacobian(const RobotModel& model, const VecX& q, double h = 1e-6) {
  const auto n = static_cast<Eigen::Index>(model.n_joints());
  MatX J(6, n);
  J.topRows(3) = fd_joint_jacobian(model, q, h);
  for (Eigen::Index j = 0; j < n; ++j) {
    VecX qp = q, qm = q;
    qp[j] += h;
    qm[j] -= h;
    const Eigen::Matrix3d D = oracle_transform(model, qp).topLeftCorner<3, 3>() *
                              oracle_transform(model, qm).topLeftCorner<3, 3>().transpose();
    const Eigen::Matrix3d W = (D - D.transpose()) / (4.0 * h);
    J.block(3, j, 3, 1) = Vec3(W(2, 1), W(0, 2), W(1, 0));
  }
  return J;
}

// Relative column-wise agreement used for Jacobian checks.
inline double rel_error(const MatX& a, const MatX& b) {
  const double scale = std::max(1.0, b.norm());
  return (a - b).norm() / scale;
}

// Dense-stacking reference for the criterion: stacks all blocks, forms
// (S^T S) and inverts it by full-pivot LU. Returns +inf when rank deficient.
inline double oracle_rho0(const RobotModel& model, const ExperimentPlan& plan, const TestPoseSet& test,
                          double sigma, const ParamMask& mask) {
  const auto d = static_cast<Eigen::Index>(mask.count());
  MatX S(static_cast<Eigen::Index>(3 * plan.size()), d);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const MatX full = full_observation_block(model, plan.configs[i], plan.mode);
    for (Eigen::Index c = 0; c < d; ++c) {
      S.block(static_cast<Eigen::Index>(3 * i), c, 3, 1) =
          full.col(static_cast<Eigen::Index>(mask.indices()[static_cast<std::size_t>(c)]));
    }
  }
  // Column equilibration keeps the LU rank decision meaningful when length,
  // offset and compliance columns differ by many orders of magnitude.
  const VecX scale = S.colwise().norm().transpose();
  if ((scale.array() == 0.0).any()) return std::numeric_limits<double>::infinity();
  const MatX Sn = S * scale.cwiseInverse().asDiagonal();
  Eigen::FullPivLU<MatX> lu(Sn.transpose() * Sn);
  if (lu.rank() < d) return std::numeric_limits<double>::infinity();
  const MatX Minv = scale.cwiseInverse().asDiagonal() * lu.inverse() * scale.cwiseInverse().asDiagonal();
  double acc = 0.0;
  for (const auto& t : test.poses) {
    const MatX full = full_observation_block(model, t, plan.mode);
    MatX B0(3, d);
    for (Eigen::Index c = 0; c < d; ++c) {
      B0.col(c) = full.col(static_cast<Eigen::Index>(mask.indices()[static_cast<std::size_t>(c)]));
    }
    acc += (B0 * Minv * B0.transpose()).trace();
  }
  return std::sqrt(sigma * sigma * acc / static_cast<double>(test.poses.size()));
}

struct Enumeration {
  double best = std::numeric_limits<double>::infinity();
  std::size_t feasible_poses = 0;
  std::size_t plans = 0;
  ExperimentPlan best_plan;
};

// Exhaustive search over a lattice problem with m = 2. Plans are unordered
// pairs (with repetition) of feasible lattice poses.
inline Enumeration enumerate_pairs(const DesignProblem& problem) {
  const Lattice& lat = *problem.lattice;
  const DesignSpace space(problem.with_size(1));
  std::vector<MeasurementConfig> poses;
  std::vector<std::size_t> idx(lat.levels.size(), 0);
  for (;;) {
    VecX x(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t v = 0; v < idx.size(); ++v) x[static_cast<Eigen::Index>(v)] = lat.levels[v][idx[v]];
    const MeasurementConfig c = space.decode_pose(x, 0);
    if (evaluate(problem.model, c, problem.constraints, problem.mode).max() <= 0.0) poses.push_back(c);
    std::size_t v = 0;
    while (v < idx.size() && ++idx[v] == lat.levels[v].size()) idx[v++] = 0;
    if (v == idx.size()) break;
  }
  Enumeration e;
  e.feasible_poses = poses.size();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    for (std::size_t j = i; j < poses.size(); ++j) {
      const ExperimentPlan plan{problem.mode, {poses[i], poses[j]}};
      const double r = oracle_rho0(problem.model, plan, problem.test, problem.sigma, problem.mask);
      ++e.plans;
      if (r < e.best) {
        e.best = r;
        e.best_plan = plan;
      }
    }
  }
  return e;
}

inline bool plan_feasible(const DesignProblem& problem, const ExperimentPlan& plan, double tol = kFeasibilityTol) {
  for (const auto& c : plan.configs) {
    if (evaluate(problem.model, c, problem.constraints, problem.mode).max() > tol) return false;
  }
  return true;
}

}  // namespace posecal::testing
