#pragma once

#include "posecal/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace posecal {

// Which of the two translational DH parameters of a link row carries the
// identified link length l_i.
enum class LengthAxis { A, D };

// One DH row, transform Rz(theta + q) * Tz(d) * Tx(a) * Rx(alpha).
// Lengths in mm, angles in rad.
struct Link {
  double alpha = 0.0;
  double a = 0.0;
  double d = 0.0;
  double theta = 0.0;
  LengthAxis length_axis = LengthAxis::A;

  double length() const { return length_axis == LengthAxis::A ? a : d; }
};

struct JointLimit {
  double lower = 0.0;
  double upper = 0.0;

  double span() const { return upper - lower; }
  bool contains(double q) const { return q >= lower && q <= upper; }
};

// Nominal serial-chain geometry with revolute joints. Immutable after
// construction; safe to share between threads.
class RobotModel {
 public:
  RobotModel(std::vector<Link> links, std::vector<JointLimit> limits,
             double payload_limit, Vec3 tool = Vec3::Zero());

  std::size_t n_joints() const { return links_.size(); }
  // 2n geometric + n compliance parameters.
  std::size_t n_params() const { return 3 * links_.size(); }

  std::span<const Link> links() const { return links_; }
  std::span<const JointLimit> limits() const { return limits_; }
  double payload_limit() const { return payload_limit_; }
  // End-effector point expressed in the last link frame [mm].
  const Vec3& tool() const { return tool_; }

  // Sum of nominal link lengths plus tool offset, a crude reach figure.
  double nominal_reach() const;

 private:
  std::vector<Link> links_;
  std::vector<JointLimit> limits_;
  double payload_limit_;
  Vec3 tool_;
};

// Deviations ΔX in the fixed layout (Δl_1..Δl_n, Δq_1..Δq_n, k_1..k_n).
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t n_joints) : values_(VecX::Zero(3 * n_joints)) {}
  explicit ParamVector(VecX values);

  std::size_t n_joints() const { return static_cast<std::size_t>(values_.size()) / 3; }
  const VecX& values() const { return values_; }
  VecX& values() { return values_; }

  double& dl(std::size_t i) { return values_[i]; }
  double& dq(std::size_t i) { return values_[n_joints() + i]; }
  double& k(std::size_t i) { return values_[2 * n_joints() + i]; }
  double dl(std::size_t i) const { return values_[i]; }
  double dq(std::size_t i) const { return values_[n_joints() + i]; }
  double k(std::size_t i) const { return values_[2 * n_joints() + i]; }

 private:
  VecX values_;
};

// Human-readable name of parameter index j: dl3, dq1, k6 (1-based joints).
std::string param_name(std::size_t n_joints, std::size_t index);

// Selector of the parameters that are actually identified.
class ParamMask {
 public:
  ParamMask() = default;
  explicit ParamMask(std::vector<bool> active);

  static ParamMask all(std::size_t n_joints);
  static ParamMask for_mode(std::size_t n_joints, CalibrationMode mode);
  // Names as produced by param_name; throws InvalidInput on unknown names.
  static ParamMask from_names(std::size_t n_joints, std::span<const std::string> names);

  std::size_t size() const { return active_.size(); }
  std::size_t count() const { return indices_.size(); }
  bool active(std::size_t j) const { return active_[j]; }
  // Active parameter indices in increasing order.
  std::span<const std::size_t> indices() const { return indices_; }
  std::vector<std::string> names() const;

  VecX select(const VecX& full) const;
  // Inverse of select: inactive entries are exactly zero.
  VecX expand(const VecX& active) const;

  bool operator==(const ParamMask& other) const { return active_ == other.active_; }

 private:
  std::vector<bool> active_;
  std::vector<std::size_t> indices_;
};

// One experiment: joint vector and optional base-frame wrench
// (force [N], torque [N*mm]).
struct MeasurementConfig {
  VecX q;
  std::optional<Vec6> wrench;
};

// Ordered measurement configurations plus calibration mode.
struct ExperimentPlan {
  CalibrationMode mode = CalibrationMode::Geometric;
  std::vector<MeasurementConfig> configs;

  std::size_t size() const { return configs.size(); }
  // Plan tiled k times (P, P, ..., P).
  ExperimentPlan repeated(std::size_t k) const;
};

// Exact end-effector position for geometry Π0 + ΔΠ. Only the geometric part
// of delta is used.
Vec3 forward_kinematics(const RobotModel& model, const VecX& q);
Vec3 forward_kinematics(const RobotModel& model, const VecX& q, const ParamVector& delta);

// 3 x 2n identification Jacobian at Π0, columns (Δl_1..Δl_n, Δq_1..Δq_n).
Mat3X param_jacobian(const RobotModel& model, const VecX& q);

// 6 x n kinematic Jacobian; rows 0-2 position, rows 3-5 orientation.
Mat6X elasto_jacobian(const RobotModel& model, const VecX& q);

// 3 x n elastostatic regressor: column j = J_j (J_j^T w), position rows.
Mat3X build_A(const RobotModel& model, const VecX& q, const Vec6& wrench);

// Points of the link polyline: base origin, frame origins 1..n, end-effector.
struct ChainGeometry {
  std::vector<Vec3> points;
  Vec3 tool_axis;  // z axis of the last frame
};
ChainGeometry chain_geometry(const RobotModel& model, const VecX& q);

}  // namespace posecal
