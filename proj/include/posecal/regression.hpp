#pragma once

#include "posecal/model.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace posecal {

// Observation block of one measurement, restricted to the active columns.
struct ObservationBlock {
  MatX B;  // 3 x d
  MeasurementConfig config;
};

struct MeasurementRecord {
  MeasurementConfig config;
  Vec3 dp;  // observed end-effector displacement [mm]
};

// Unmasked 3 x 3n block: [J | 0], [0 | A] or [J | A] depending on mode.
MatX full_observation_block(const RobotModel& model, const MeasurementConfig& config,
                            CalibrationMode mode);

ObservationBlock build_B(const RobotModel& model, const MeasurementConfig& config,
                         CalibrationMode mode, const ParamMask& mask);

std::vector<ObservationBlock> build_blocks(const RobotModel& model, const ExperimentPlan& plan,
                                           const ParamMask& mask);

// Σ B_i^T B_i, accumulated in a canonical (sorted) configuration order so the
// result does not depend on measurement ordering.
MatX normal_matrix(std::span<const ObservationBlock> blocks);

struct IdentifiabilityReport {
  // Condition number of D^-1/2 M D^-1/2 with D = diag(M); +inf when singular.
  double scaled_condition = 0.0;
  bool identifiable = false;
  // Parameter groups spanning (near) null-space directions.
  std::vector<std::string> weak_directions;
};

IdentifiabilityReport assess_identifiability(const MatX& normal,
                                             std::span<const std::string> labels);
// Throws Unidentifiable naming the weak directions.
void require_identifiable(const MatX& normal, std::span<const std::string> labels);

// Least-squares solver for a fixed set of observation blocks. Factorizes the
// column-equilibrated stacked matrix once; solve() is cheap.
class LinearIdentifier {
 public:
  LinearIdentifier(std::span<const ObservationBlock> blocks, const ParamMask& mask);

  std::size_t n_measurements() const { return n_meas_; }
  std::size_t n_active() const { return static_cast<std::size_t>(scale_.size()); }

  // Active-parameter estimate for displacements given in block order.
  VecX solve(std::span<const Vec3> dp) const;
  // Stacked residual dp - B x.
  VecX residuals(std::span<const Vec3> dp, const VecX& estimate) const;

 private:
  std::size_t n_meas_;
  MatX stacked_;  // unscaled, 3m x d
  VecX scale_;    // column norms
  Eigen::ColPivHouseholderQR<MatX> qr_;
};

struct IdentificationResult {
  ParamVector estimate;  // full layout; masked-out entries are exactly zero
  VecX active;           // active-parameter estimate
  VecX residuals;        // stacked 3m residual vector
  double residual_rms = 0.0;
};

// Least-squares estimate; result independent of measurement order.
IdentificationResult identify(std::span<const ObservationBlock> blocks,
                              std::span<const MeasurementRecord> records, const ParamMask& mask);

// σ² (Σ B_i^T B_i)^{-1}
MatX covariance(std::span<const ObservationBlock> blocks, double sigma, const ParamMask& mask);

// Measurement CSV: header q1..qn[,w1..w6],dpx,dpy,dpz; q in rad, force in N,
// torque in N*mm, displacement in mm.
std::vector<MeasurementRecord> read_measurements_csv(std::istream& in, std::size_t n_joints);
void write_measurements_csv(std::ostream& out, std::span<const MeasurementRecord> records,
                            std::size_t n_joints);

}  // namespace posecal
