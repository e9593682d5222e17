#pragma once

#include "posecal/optimize.hpp"
#include "posecal/simulate.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace posecal::io {

inline constexpr int kSchemaVersion = 1;

struct SimulationSettings {
  std::size_t trials = 10000;
  std::optional<std::uint64_t> seed;
  Generator generator = Generator::Linearized;
  std::optional<ParamVector> truth;
  TruthLaw law;
};

// Parsed run configuration. Angles are converted from degrees on load.
struct RunConfig {
  std::filesystem::path source;
  RobotModel model = RobotModel({Link{}}, {JointLimit{-1.0, 1.0}}, 1.0);
  ConstraintSet constraints;
  CalibrationMode mode = CalibrationMode::Geometric;
  ParamMask mask;
  TestPoseSet test;
  double sigma = kDefaultSigma;

  Strategy strategy = Strategy::Hybrid;
  std::size_t m = 0;
  std::optional<std::uint64_t> seed;
  OptimizerOptions options;
  std::optional<Lattice> lattice;
  std::vector<Factorization> factorizations;
  std::vector<Strategy> compare_strategies;

  std::optional<SimulationSettings> simulation;
  std::optional<std::string> output_dir;

  DesignProblem problem() const;
};

// Throws ConfigError with "<file>: <json pointer>: <message>" diagnostics.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& source);

// Plan file: written by `plan`, read by `evaluate` and `simulate`.
ExperimentPlan load_plan(const std::filesystem::path& path, const RobotModel& model);
ExperimentPlan parse_plan(const std::string& text, const std::string& source,
                          const RobotModel& model);

std::string plan_json(const RunConfig& config, const DesignReport& report);
std::string simulation_json(const RunConfig& config, const SimulationSpec& spec,
                            const SimulationReport& report);
std::string comparison_json(const RunConfig& config, const ComparisonTable& table);

// Convergence trace CSV: evaluations,elapsed_s,best_rho0.
std::string trace_csv(std::span<const TracePoint> trace);
std::string comparison_csv(const ComparisonTable& table);
std::string comparison_text(const ComparisonTable& table);

// Writes to a temporary sibling and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace posecal::io
