#pragma once

#include <Eigen/Dense>

#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace posecal {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Mat3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;
using Mat6X = Eigen::Matrix<double, 6, Eigen::Dynamic>;

inline constexpr double kPi = std::numbers::pi;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Error hierarchy. Infeasibility of a single configuration is a value
// (see constraints.hpp), never an exception.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Information matrix singular (or condition >= kConditionLimit) for the mask.
class Unidentifiable : public Error {
 public:
  using Error::Error;
};

class InfeasibleProblem : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class CalibrationMode { Geometric, Elastostatic, Combined };

constexpr bool needs_wrench(CalibrationMode mode) {
  return mode != CalibrationMode::Geometric;
}

std::string_view to_string(CalibrationMode mode);
CalibrationMode parse_mode(std::string_view text);

// Plans whose scaled information matrix exceeds this condition number are
// treated as unidentifiable.
inline constexpr double kConditionLimit = 1e12;

// A regressor column whose norm is below this fraction of the largest column
// norm is numerically zero (e.g. an offset of a joint whose axis passes
// through the measured point).
inline constexpr double kNegligibleColumn = 1e-12;

// Constraint values up to this are accepted as satisfied for returned plans.
inline constexpr double kFeasibilityTol = 1e-9;

// Default measurement noise standard deviation [mm].
inline constexpr double kDefaultSigma = 0.03;

}  // namespace posecal
