#include "posecal/model.hpp"

#include <cmath>
#include <sstream>

namespace posecal {

std::string_view to_string(CalibrationMode mode) {
  switch (mode) {
    case CalibrationMode::Geometric: return "geometric";
    case CalibrationMode::Elastostatic: return "elastostatic";
    case CalibrationMode::Combined: return "combined";
  }
  return "?";
}

CalibrationMode parse_mode(std::string_view text) {
  if (text == "geometric") return CalibrationMode::Geometric;
  if (text == "elastostatic") return CalibrationMode::Elastostatic;
  if (text == "combined") return CalibrationMode::Combined;
  throw InvalidInput("unknown calibration mode '" + std::string(text) +
                     "' (expected geometric, elastostatic or combined)");
}

RobotModel::RobotModel(std::vector<Link> links, std::vector<JointLimit> limits,
                       double payload_limit, Vec3 tool)
    : links_(std::move(links)),
      limits_(std::move(limits)),
      payload_limit_(payload_limit),
      tool_(std::move(tool)) {
  if (links_.empty()) throw InvalidInput("robot model needs at least one joint");
  if (limits_.size() != links_.size()) {
    std::ostringstream os;
    os << "robot model has " << links_.size() << " links but " << limits_.size()
       << " joint limits";
    throw InvalidInput(os.str());
  }
  for (std::size_t i = 0; i < limits_.size(); ++i) {
    if (!(limits_[i].lower < limits_[i].upper)) {
      throw InvalidInput("joint " + std::to_string(i + 1) + ": lower limit must be below upper limit");
    }
    if (!(links_[i].length() >= 0.0)) {
      throw InvalidInput("link " + std::to_string(i + 1) + ": nominal length must be >= 0");
    }
  }
  if (!(payload_limit_ > 0.0)) throw InvalidInput("payload limit must be > 0");
  if (!tool_.allFinite()) throw InvalidInput("tool offset must be finite");
}

double RobotModel::nominal_reach() const {
  double reach = tool_.norm();
  for (const auto& link : links_) reach += std::abs(link.a) + std::abs(link.d);
  return reach;
}

ParamVector::ParamVector(VecX values) : values_(std::move(values)) {
  if (values_.size() % 3 != 0) {
    throw InvalidInput("parameter vector length must be a multiple of 3");
  }
}

std::string param_name(std::size_t n_joints, std::size_t index) {
  const std::size_t block = index / n_joints;
  const std::size_t joint = index % n_joints + 1;
  static constexpr const char* prefix[] = {"dl", "dq", "k"};
  if (block > 2) throw InvalidInput("parameter index out of range");
  return prefix[block] + std::to_string(joint);
}

ParamMask::ParamMask(std::vector<bool> active) : active_(std::move(active)) {
  if (active_.size() % 3 != 0) throw InvalidInput("mask length must be 3n");
  for (std::size_t j = 0; j < active_.size(); ++j) {
    if (active_[j]) indices_.push_back(j);
  }
}

ParamMask ParamMask::all(std::size_t n_joints) {
  return ParamMask(std::vector<bool>(3 * n_joints, true));
}

ParamMask ParamMask::for_mode(std::size_t n_joints, CalibrationMode mode) {
  std::vector<bool> active(3 * n_joints, false);
  const bool geo = mode != CalibrationMode::Elastostatic;
  const bool ela = mode != CalibrationMode::Geometric;
  for (std::size_t j = 0; j < 2 * n_joints; ++j) active[j] = geo;
  for (std::size_t j = 2 * n_joints; j < 3 * n_joints; ++j) active[j] = ela;
  return ParamMask(std::move(active));
}

ParamMask ParamMask::from_names(std::size_t n_joints, std::span<const std::string> names) {
  std::vector<bool> active(3 * n_joints, false);
  for (const auto& name : names) {
    bool found = false;
    for (std::size_t j = 0; j < active.size(); ++j) {
      if (param_name(n_joints, j) == name) {
        if (active[j]) throw InvalidInput("parameter '" + name + "' listed twice in mask");
        active[j] = true;
        found = true;
        break;
      }
    }
    if (!found) throw InvalidInput("unknown parameter '" + name + "' in mask");
  }
  return ParamMask(std::move(active));
}

std::vector<std::string> ParamMask::names() const {
  std::vector<std::string> out;
  out.reserve(indices_.size());
  for (auto j : indices_) out.push_back(param_name(active_.size() / 3, j));
  return out;
}

VecX ParamMask::select(const VecX& full) const {
  if (static_cast<std::size_t>(full.size()) != active_.size()) {
    throw InvalidInput("parameter vector does not match mask length");
  }
  VecX out(indices_.size());
  for (std::size_t c = 0; c < indices_.size(); ++c) out[c] = full[indices_[c]];
  return out;
}

VecX ParamMask::expand(const VecX& active) const {
  if (static_cast<std::size_t>(active.size()) != indices_.size()) {
    throw InvalidInput("active parameter vector does not match mask count");
  }
  VecX out = VecX::Zero(active_.size());
  for (std::size_t c = 0; c < indices_.size(); ++c) out[indices_[c]] = active[c];
  return out;
}

ExperimentPlan ExperimentPlan::repeated(std::size_t k) const {
  if (k < 1) throw InvalidInput("repetition count must be >= 1");
  ExperimentPlan out{mode, {}};
  out.configs.reserve(configs.size() * k);
  for (std::size_t r = 0; r < k; ++r) {
    out.configs.insert(out.configs.end(), configs.begin(), configs.end());
  }
  return out;
}

namespace {

// Per-joint frame data along the chain at one configuration.
struct ChainState {
  std::vector<Vec3> axis;        // joint i rotation axis (z of frame i-1)
  std::vector<Vec3> origin;      // origin of frame i-1
  std::vector<Vec3> length_dir;  // direction in which Δl_i moves the chain
  std::vector<Vec3> frame_origin;  // origins of frames 1..n
  Vec3 p;
  Vec3 tool_axis;
};

void check_q(const RobotModel& model, const VecX& q) {
  if (static_cast<std::size_t>(q.size()) != model.n_joints()) {
    throw InvalidInput("joint vector has length " + std::to_string(q.size()) + ", model has " +
                       std::to_string(model.n_joints()) + " joints");
  }
}

ChainState propagate(const RobotModel& model, const VecX& q, const ParamVector* delta) {
  const std::size_t n = model.n_joints();
  ChainState s;
  s.axis.resize(n);
  s.origin.resize(n);
  s.length_dir.resize(n);
  s.frame_origin.resize(n);

  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Vec3 t = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Link& link = model.links()[i];
    double theta = link.theta + q[i];
    double a = link.a;
    double d = link.d;
    if (delta) {
      theta += delta->dq(i);
      (link.length_axis == LengthAxis::A ? a : d) += delta->dl(i);
    }
    s.axis[i] = R.col(2);
    s.origin[i] = t;

    const double ct = std::cos(theta), st = std::sin(theta);
    const double ca = std::cos(link.alpha), sa = std::sin(link.alpha);
    // x axis after the joint rotation; Tz, Tx and Rx leave it unchanged.
    const Vec3 x_after = ct * R.col(0) + st * R.col(1);
    const Vec3 y_after = -st * R.col(0) + ct * R.col(1);
    const Vec3 z_prev = R.col(2);
    s.length_dir[i] = link.length_axis == LengthAxis::A ? x_after : z_prev;

    t += d * z_prev + a * x_after;
    Eigen::Matrix3d next;
    next.col(0) = x_after;
    next.col(1) = ca * y_after + sa * z_prev;
    next.col(2) = -sa * y_after + ca * z_prev;
    R = next;
    s.frame_origin[i] = t;
  }
  s.p = t + R * model.tool();
  s.tool_axis = R.col(2);
  return s;
}

}  // namespace

Vec3 forward_kinematics(const RobotModel& model, const VecX& q) {
  check_q(model, q);
  return propagate(model, q, nullptr).p;
}

Vec3 forward_kinematics(const RobotModel& model, const VecX& q, const ParamVector& delta) {
  check_q(model, q);
  if (delta.values().size() != static_cast<Eigen::Index>(model.n_params())) {
    throw InvalidInput("parameter vector length " + std::to_string(delta.values().size()) +
                       " does not match model (" + std::to_string(model.n_params()) + ")");
  }
  return propagate(model, q, &delta).p;
}

Mat3X param_jacobian(const RobotModel& model, const VecX& q) {
  check_q(model, q);
  const std::size_t n = model.n_joints();
  const ChainState s = propagate(model, q, nullptr);
  Mat3X J(3, 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    J.col(i) = s.length_dir[i];
    J.col(n + i) = s.axis[i].cross(s.p - s.origin[i]);
  }
  return J;
}

Mat6X elasto_jacobian(const RobotModel& model, const VecX& q) {
  check_q(model, q);
  const std::size_t n = model.n_joints();
  const ChainState s = propagate(model, q, nullptr);
  Mat6X J(6, n);
  for (std::size_t i = 0; i < n; ++i) {
    J.col(i).head<3>() = s.axis[i].cross(s.p - s.origin[i]);
    J.col(i).tail<3>() = s.axis[i];
  }
  return J;
}

Mat3X build_A(const RobotModel& model, const VecX& q, const Vec6& wrench) {
  const Mat6X J = elasto_jacobian(model, q);
  Mat3X A(3, J.cols());
  for (Eigen::Index j = 0; j < J.cols(); ++j) {
    A.col(j) = J.col(j).head<3>() * J.col(j).dot(wrench);
  }
  return A;
}

ChainGeometry chain_geometry(const RobotModel& model, const VecX& q) {
  check_q(model, q);
  const ChainState s = propagate(model, q, nullptr);
  ChainGeometry g;
  g.points.reserve(model.n_joints() + 2);
  g.points.push_back(Vec3::Zero());
  for (const auto& o : s.frame_origin) g.points.push_back(o);
  g.points.push_back(s.p);
  g.tool_axis = s.tool_axis;
  return g;
}

}  // namespace posecal
