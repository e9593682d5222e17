#include "posecal/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>

namespace posecal {

std::string_view to_string(Generator g) {
  return g == Generator::Linearized ? "linearized" : "nonlinear";
}

Generator parse_generator(std::string_view text) {
  if (text == "linearized") return Generator::Linearized;
  if (text == "nonlinear") return Generator::Nonlinear;
  throw InvalidInput("unknown generator '" + std::string(text) + "' (expected linearized or nonlinear)");
}

ParamVector sample_truth(std::size_t n_joints, const TruthLaw& law, const ParamMask& mask,
                         std::uint64_t seed) {
  if (mask.size() != 3 * n_joints) throw InvalidInput("mask does not match joint count");
  if (law.dl_range < 0.0 || law.dq_range < 0.0 || law.k_min < 0.0 || law.k_max < law.k_min) {
    throw InvalidInput("invalid ground-truth ranges");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> uk(0.0, 1.0);
  ParamVector truth(n_joints);
  for (std::size_t i = 0; i < n_joints; ++i) truth.dl(i) = law.dl_range * u(rng);
  for (std::size_t i = 0; i < n_joints; ++i) truth.dq(i) = law.dq_range * u(rng);
  for (std::size_t i = 0; i < n_joints; ++i) truth.k(i) = law.k_min + (law.k_max - law.k_min) * uk(rng);
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (!mask.active(j)) truth.values()[static_cast<Eigen::Index>(j)] = 0.0;
  }
  return truth;
}

std::vector<MeasurementRecord> simulate_measurements(const RobotModel& model,
                                                     const ParamVector& truth,
                                                     const ExperimentPlan& plan, double sigma,
                                                     std::uint64_t seed, Generator generator) {
  if (!(sigma >= 0.0)) throw InvalidInput("sigma must be >= 0");
  if (truth.n_joints() != model.n_joints()) throw InvalidInput("truth vector does not match model");
  const std::size_t n = model.n_joints();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<MeasurementRecord> out;
  out.reserve(plan.size());
  for (const auto& c : plan.configs) {
    Vec3 dp;
    if (generator == Generator::Linearized) {
      dp = full_observation_block(model, c, plan.mode) * truth.values();
    } else {
      dp = Vec3::Zero();
      if (plan.mode != CalibrationMode::Elastostatic) {
        dp = forward_kinematics(model, c.q, truth) - forward_kinematics(model, c.q);
      }
      if (needs_wrench(plan.mode)) {
        if (!c.wrench) throw InvalidInput("configuration lacks a wrench in a loaded mode");
        dp += build_A(model, c.q, *c.wrench) * truth.values().tail(static_cast<Eigen::Index>(n));
      }
    }
    for (int a = 0; a < 3; ++a) dp[a] += sigma * noise(rng);
    out.push_back(MeasurementRecord{c, dp});
  }
  return out;
}

SimulationReport monte_carlo_validation(const SimulationSpec& spec, const Execution& exec) {
  if (spec.n_trials < 1) throw InvalidInput("n_trials must be >= 1");
  if (!(spec.sigma >= 0.0)) throw InvalidInput("sigma must be >= 0");
  if (spec.plan.mode != spec.mode) throw InvalidInput("plan mode does not match simulation mode");
  if (spec.test.poses.empty()) throw InvalidInput("test-pose set is empty");
  const RobotModel& model = spec.model;
  const std::size_t n = model.n_joints();

  SimulationReport rep;
  rep.n_trials = spec.n_trials;
  rep.seed = spec.seed;
  rep.truth = spec.truth ? *spec.truth
                         : sample_truth(n, spec.law, spec.mask,
                                        derive_seed(spec.seed, std::numeric_limits<std::uint64_t>::max()));
  if (rep.truth.n_joints() != n) throw InvalidInput("truth vector does not match model");

  const auto blocks = build_blocks(model, spec.plan, spec.mask);
  const LinearIdentifier solver(blocks, spec.mask);
  const VecX truth_active = spec.mask.select(rep.truth.values());
  std::vector<MatX> b0;
  for (const auto& pose : spec.test.poses) b0.push_back(build_B(model, pose, spec.mode, spec.mask).B);

  const auto N = static_cast<Eigen::Index>(spec.n_trials);
  const auto d = static_cast<Eigen::Index>(spec.mask.count());
  const auto T = static_cast<Eigen::Index>(b0.size());
  MatX errors(N, d);
  MatX dps(N, 3 * T);
  parallel_for(spec.n_trials, exec, [&](std::size_t t) {
    const auto recs = simulate_measurements(model, rep.truth, spec.plan, spec.sigma,
                                            derive_seed(spec.seed, t), spec.generator);
    std::vector<Vec3> dp;
    dp.reserve(recs.size());
    for (const auto& r : recs) dp.push_back(r.dp);
    const VecX est = solver.solve(dp);
    if (!est.allFinite()) {
      throw Unidentifiable("trial " + std::to_string(t) + ": identification produced non-finite estimates");
    }
    const VecX err = est - truth_active;
    const auto row = static_cast<Eigen::Index>(t);
    errors.row(row) = err.transpose();
    for (Eigen::Index p = 0; p < T; ++p) {
      dps.block(row, 3 * p, 1, 3) = (b0[static_cast<std::size_t>(p)] * err).transpose();
    }
  });

  const double Nd = static_cast<double>(spec.n_trials);
  rep.empirical_rho0 = std::sqrt(dps.squaredNorm() / (Nd * static_cast<double>(T)));
  const Rho0Evaluator eval(model, spec.mode, spec.mask, spec.test, spec.sigma);
  rep.predicted_rho0 = eval.evaluate(spec.plan.configs);
  rep.ratio = rep.predicted_rho0 > 0.0 ? rep.empirical_rho0 / rep.predicted_rho0
                                       : std::numeric_limits<double>::quiet_NaN();

  rep.mean_error = errors.colwise().mean().transpose();
  rep.mean_estimate = truth_active + rep.mean_error;
  const MatX centered = errors.rowwise() - rep.mean_error.transpose();
  rep.error_covariance = spec.n_trials > 1 ? MatX(centered.transpose() * centered / (Nd - 1.0))
                                           : MatX::Zero(d, d);
  rep.predicted_covariance = covariance(blocks, spec.sigma, spec.mask);

  const auto max_z = [&](const VecX& mean, const VecX& var) {
    double z = 0.0;
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
      const double se = std::sqrt(var[i] / Nd);
      if (se > 0.0) z = std::max(z, std::abs(mean[i]) / se);
    }
    return z;
  };
  rep.estimate_bias_max_z = max_z(rep.mean_error, rep.error_covariance.diagonal());

  const VecX dp_mean = dps.colwise().mean().transpose();
  const MatX dp_centered = dps.rowwise() - dp_mean.transpose();
  const VecX dp_var = spec.n_trials > 1
                          ? VecX(dp_centered.colwise().squaredNorm().transpose() / (Nd - 1.0))
                          : VecX::Zero(3 * T);
  rep.dp_mean_max_z = max_z(dp_mean, dp_var);
  for (Eigen::Index p = 0; p < T; ++p) rep.dp_mean.push_back(dp_mean.segment<3>(3 * p));

  double worst = 0.0;
  const VecX& pd = rep.predicted_covariance.diagonal();
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double scale = std::sqrt(pd[i] * pd[j]);
      if (scale > 0.0) {
        worst = std::max(worst, std::abs(rep.error_covariance(i, j) - rep.predicted_covariance(i, j)) / scale);
      }
    }
  }
  rep.covariance_max_rel_error = worst;
  return rep;
}

void write_summary(std::ostream& out, const SimulationReport& r) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::setprecision(6);
  out << "Monte Carlo validation (" << r.n_trials << " trials, seed " << r.seed << ")\n"
      << "  predicted rho0 [mm]  " << r.predicted_rho0 << '\n'
      << "  empirical rho0 [mm]  " << r.empirical_rho0 << '\n'
      << "  ratio                " << r.ratio << '\n'
      << "  covariance max rel. deviation  " << r.covariance_max_rel_error << '\n'
      << "  estimate bias, max |z|         " << r.estimate_bias_max_z << '\n'
      << "  test-pose error mean, max |z|  " << r.dp_mean_max_z << '\n';
  out.flags(flags);
  out.precision(prec);
}

}  // namespace posecal
