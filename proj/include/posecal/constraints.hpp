#pragma once

#include "posecal/model.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace posecal {

// Work-cell constraints on one measurement configuration. Positions in mm,
// angles in rad, force in N.
struct ConstraintSet {
  std::vector<JointLimit> joint_limits;
  double payload_limit = 0.0;
  std::optional<double> floor_z;  // p_z_min
  double min_collision_radius = 0.0;  // r_min
  Vec3 box_min = Vec3::Constant(-std::numeric_limits<double>::infinity());
  Vec3 box_max = Vec3::Constant(std::numeric_limits<double>::infinity());
  std::optional<double> min_tilt;  // phi_min, tool axis vs base z

  // Joint limits and payload of the model, everything else unconstrained.
  static ConstraintSet from_model(const RobotModel& model);
  // Throws InvalidInput when the set violates its own invariants.
  void validate(std::size_t n_joints) const;
};

// All constraint values C(q, w); the configuration is feasible iff every
// entry is <= 0.
struct ConstraintValues {
  VecX joint;         // C1: (q - q_max ; q_min - q), 2n entries
  double payload = 0.0;    // C2: |F| - F_max
  double floor = 0.0;      // C3[0]: p_z_min - p_z
  double collision = 0.0;  // C3[1]: r_min - r
  Vec6 box = Vec6::Zero();  // C4: (p - p_max ; p_min - p)
  std::optional<double> tilt;  // cos(angle(tool axis, z)) - cos(phi_min)

  std::size_t size() const;
  VecX flat() const;
  double max() const;
  bool feasible(double tol = 0.0) const { return max() <= tol; }
  // Labels matching flat(), e.g. "C1.upper[2]".
  static std::vector<std::string> labels(std::size_t n_joints, bool with_tilt);
};

// Minimum distance between the half-line p + t*dir (t >= 0) and the link
// polyline, excluding the final segment that ends at p.
double loading_clearance(const ChainGeometry& chain, const Vec3& dir);

ConstraintValues evaluate(const RobotModel& model, const MeasurementConfig& config,
                          const ConstraintSet& cs, CalibrationMode mode);

// Force vector of magnitude F with direction given by polar/azimuth angles.
Vec6 wrench_from_direction(double force, double polar, double azimuth);

// Rejection sampler: joints uniform within limits, wrench of magnitude F_max
// with direction uniform on the sphere and zero torque (loaded modes only).
// Deterministic given the seed. One instance per worker.
class FeasibleSampler {
 public:
  static constexpr std::uint64_t kMaxRejections = 1'000'000;

  FeasibleSampler(const RobotModel& model, const ConstraintSet& cs, CalibrationMode mode,
                  std::uint64_t seed);

  // Throws InfeasibleProblem after kMaxRejections consecutive rejections.
  MeasurementConfig next();

  std::uint64_t accepted() const { return accepted_; }
  std::uint64_t drawn() const { return drawn_; }
  double acceptance_rate() const {
    return drawn_ ? static_cast<double>(accepted_) / static_cast<double>(drawn_) : 0.0;
  }

 private:
  MeasurementConfig draw();

  RobotModel model_;
  ConstraintSet cs_;
  CalibrationMode mode_;
  std::mt19937_64 rng_;
  std::uint64_t accepted_ = 0;
  std::uint64_t drawn_ = 0;
};

MeasurementConfig sample_feasible(const RobotModel& model, const ConstraintSet& cs,
                                  CalibrationMode mode, std::uint64_t seed);

}  // namespace posecal
