#pragma once

#include "posecal/criterion.hpp"
#include "posecal/model.hpp"
#include "posecal/parallel.hpp"
#include "posecal/regression.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace posecal {

// How synthetic displacements are produced from the true deviations.
enum class Generator {
  Linearized,  // dp = B(q, w) ΔX + ε
  Nonlinear,   // dp = g(q, Π0 + ΔΠ) - g(q, Π0) + A(q, w) k + ε
};

std::string_view to_string(Generator g);
Generator parse_generator(std::string_view text);

// Uniform ranges for drawing illustrative ground-truth deviations.
struct TruthLaw {
  double dl_range = 2.0;      // Δl ~ U(-r, r) [mm]
  double dq_range = 0.002;    // Δq ~ U(-r, r) [rad]
  double k_min = 0.5e-6;      // k ~ U(k_min, k_max) [rad/(N*mm)]
  double k_max = 1.5e-6;
};

// Random deviations with inactive entries set to zero.
ParamVector sample_truth(std::size_t n_joints, const TruthLaw& law, const ParamMask& mask,
                         std::uint64_t seed);

// Synthetic experiment: one record per plan configuration, in plan order.
// Noise is i.i.d. N(0, σ²) per Cartesian component, drawn in plan order.
std::vector<MeasurementRecord> simulate_measurements(const RobotModel& model,
                                                     const ParamVector& truth,
                                                     const ExperimentPlan& plan, double sigma,
                                                     std::uint64_t seed,
                                                     Generator generator = Generator::Linearized);

struct SimulationSpec {
  RobotModel model;
  CalibrationMode mode = CalibrationMode::Geometric;
  ParamMask mask;
  std::optional<ParamVector> truth;  // drawn from `law` when absent
  TruthLaw law;
  ExperimentPlan plan;
  TestPoseSet test;
  double sigma = kDefaultSigma;
  std::size_t n_trials = 10000;
  std::uint64_t seed = 0;
  Generator generator = Generator::Linearized;
};

struct SimulationReport {
  std::size_t n_trials = 0;
  std::uint64_t seed = 0;
  ParamVector truth;
  double empirical_rho0 = 0.0;  // sqrt(mean |δp|^2) over trials and test poses
  double predicted_rho0 = 0.0;
  double ratio = 0.0;           // NaN when predicted is zero

  VecX mean_estimate;       // active parameters
  VecX mean_error;          // mean of (estimate - truth), active
  MatX error_covariance;    // empirical covariance of the estimation error
  MatX predicted_covariance;
  // max |C_emp - C_pred|_ij / sqrt(C_pred_ii C_pred_jj)
  double covariance_max_rel_error = 0.0;
  // max over components of |mean| / standard error
  double estimate_bias_max_z = 0.0;
  double dp_mean_max_z = 0.0;
  std::vector<Vec3> dp_mean;  // per test pose
};

// Repeated simulate -> identify -> compensate cycle. Trial t draws its noise
// from derive_seed(spec.seed, t); results do not depend on the thread count.
SimulationReport monte_carlo_validation(const SimulationSpec& spec, const Execution& exec = {});

void write_summary(std::ostream& out, const SimulationReport& report);

}  // namespace posecal
