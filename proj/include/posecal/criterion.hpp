#pragma once

#include "posecal/model.hpp"
#include "posecal/regression.hpp"

#include <optional>
#include <span>
#include <vector>

namespace posecal {

// Configurations where compensated accuracy matters. Aggregation over the
// set is the arithmetic mean of rho0^2.
struct TestPoseSet {
  std::vector<MeasurementConfig> poses;
};

struct InfoMatrix {
  MatX M;  // Σ B_i^T B_i, d x d
  std::size_t m = 0;
};

InfoMatrix info_matrix(const RobotModel& model, const ExperimentPlan& plan, const ParamMask& mask);

// Test-pose accuracy criterion
//   rho0 = sqrt(σ² · mean_t trace(B0_t M^{-1} B0_t^T))   [mm]
// Throws Unidentifiable for a singular information matrix.
double rho0(const RobotModel& model, const ExperimentPlan& plan, const TestPoseSet& test,
            double sigma, const ParamMask& mask);

// Core of the criterion for an explicit information matrix M and test weight
// W = mean_t B0_t^T B0_t: sqrt(σ² trace(M^-1 W)). The solve goes through the
// eigenbasis of the diagonally scaled M; nullopt when that scaled matrix has
// condition >= kConditionLimit.
std::optional<double> rho0_from_info(const MatX& M, const MatX& weight, double sigma);

// Accuracy of the k-fold repeated plan from the accuracy of the base plan.
double rho0_factorized(double rho0_base, int k);

// Precomputes the test-pose weighting so repeated evaluation inside optimizer
// loops only builds the plan blocks and one factorization.
class Rho0Evaluator {
 public:
  Rho0Evaluator(const RobotModel& model, CalibrationMode mode, ParamMask mask,
                const TestPoseSet& test, double sigma);

  CalibrationMode mode() const { return mode_; }
  const ParamMask& mask() const { return mask_; }
  double sigma() const { return sigma_; }

  // nullopt when the plan is unidentifiable.
  std::optional<double> try_evaluate(std::span<const MeasurementConfig> configs) const;
  double evaluate(std::span<const MeasurementConfig> configs) const;

  std::optional<double> try_from_info(const MatX& M) const;
  double from_info(const MatX& M) const;

  // Mean of B0^T B0 over the test poses (d x d).
  const MatX& test_weight() const { return weight_; }

 private:
  RobotModel model_;
  CalibrationMode mode_;
  ParamMask mask_;
  double sigma_;
  MatX weight_;
};

}  // namespace posecal
