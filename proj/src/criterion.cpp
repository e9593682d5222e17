#include "posecal/criterion.hpp"

#include <cmath>

namespace posecal {

InfoMatrix info_matrix(const RobotModel& model, const ExperimentPlan& plan, const ParamMask& mask) {
  if (plan.configs.empty()) throw InvalidInput("info_matrix: plan is empty");
  const auto blocks = build_blocks(model, plan, mask);
  return InfoMatrix{normal_matrix(blocks), plan.size()};
}

double rho0(const RobotModel& model, const ExperimentPlan& plan, const TestPoseSet& test,
            double sigma, const ParamMask& mask) {
  const Rho0Evaluator eval(model, plan.mode, mask, test, sigma);
  return eval.evaluate(plan.configs);
}

std::optional<double> rho0_from_info(const MatX& M, const MatX& weight, double sigma) {
  const Eigen::Index d = M.rows();
  if (d == 0 || M.cols() != d || d != weight.rows() || weight.cols() != d) return std::nullopt;
  const double floor = kNegligibleColumn * kNegligibleColumn * M.diagonal().maxCoeff();
  VecX inv_sqrt(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(M(j, j) > floor) || !std::isfinite(M(j, j))) return std::nullopt;
    inv_sqrt[j] = 1.0 / std::sqrt(M(j, j));
  }
  const MatX S = inv_sqrt.asDiagonal() * M * inv_sqrt.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<MatX> eig(S);
  if (eig.info() != Eigen::Success) return std::nullopt;
  const VecX& lambda = eig.eigenvalues();
  const double lmax = lambda.maxCoeff();
  const double lmin = lambda.minCoeff();
  if (!(lmin > 0.0) || !(lmax / lmin < kConditionLimit)) return std::nullopt;

  // trace(M^-1 W) = trace(S^-1 W~), W~ = D^-1/2 W D^-1/2, via the eigenbasis of S.
  const MatX W = inv_sqrt.asDiagonal() * weight * inv_sqrt.asDiagonal();
  const MatX& V = eig.eigenvectors();
  double trace = 0.0;
  for (Eigen::Index e = 0; e < d; ++e) {
    trace += V.col(e).dot(W * V.col(e)) / lambda[e];
  }
  trace = std::max(trace, 0.0);
  return std::sqrt(sigma * sigma * trace);
}

double rho0_factorized(double rho0_base, int k) {
  if (k < 1) throw InvalidInput("repetition count k must be >= 1");
  if (!(rho0_base > 0.0)) throw InvalidInput("base accuracy must be > 0");
  return rho0_base / std::sqrt(static_cast<double>(k));
}

Rho0Evaluator::Rho0Evaluator(const RobotModel& model, CalibrationMode mode, ParamMask mask,
                             const TestPoseSet& test, double sigma)
    : model_(model), mode_(mode), mask_(std::move(mask)), sigma_(sigma) {
  if (!(sigma_ >= 0.0)) throw InvalidInput("sigma must be >= 0");
  if (test.poses.empty()) throw InvalidInput("test-pose set is empty");
  if (mask_.size() != model_.n_params()) throw InvalidInput("mask does not match model");
  const auto d = static_cast<Eigen::Index>(mask_.count());
  weight_ = MatX::Zero(d, d);
  for (const auto& pose : test.poses) {
    const ObservationBlock b0 = build_B(model_, pose, mode_, mask_);
    weight_.noalias() += b0.B.transpose() * b0.B;
  }
  weight_ /= static_cast<double>(test.poses.size());
}

std::optional<double> Rho0Evaluator::try_from_info(const MatX& M) const {
  return rho0_from_info(M, weight_, sigma_);
}

double Rho0Evaluator::from_info(const MatX& M) const {
  if (auto r = try_from_info(M)) return *r;
  require_identifiable(M, mask_.names());
  throw Unidentifiable("unidentifiable plan: information matrix is not positive definite");
}

std::optional<double> Rho0Evaluator::try_evaluate(std::span<const MeasurementConfig> configs) const {
  if (configs.empty()) return std::nullopt;
  std::vector<ObservationBlock> blocks;
  blocks.reserve(configs.size());
  for (const auto& c : configs) blocks.push_back(build_B(model_, c, mode_, mask_));
  return try_from_info(normal_matrix(blocks));
}

double Rho0Evaluator::evaluate(std::span<const MeasurementConfig> configs) const {
  if (configs.empty()) throw InvalidInput("plan is empty");
  std::vector<ObservationBlock> blocks;
  blocks.reserve(configs.size());
  for (const auto& c : configs) blocks.push_back(build_B(model_, c, mode_, mask_));
  return from_info(normal_matrix(blocks));
}

}  // namespace posecal
