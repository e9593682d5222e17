#include "posecal/constraints.hpp"

#include <algorithm>
#include <cmath>

namespace posecal {

ConstraintSet ConstraintSet::from_model(const RobotModel& model) {
  ConstraintSet cs;
  cs.joint_limits.assign(model.limits().begin(), model.limits().end());
  cs.payload_limit = model.payload_limit();
  return cs;
}

void ConstraintSet::validate(std::size_t n_joints) const {
  if (joint_limits.size() != n_joints) throw InvalidInput("constraint set joint limit count mismatch");
  for (const auto& lim : joint_limits) {
    if (!(lim.lower < lim.upper)) throw InvalidInput("joint limits must satisfy lower < upper");
  }
  if (!(payload_limit > 0.0)) throw InvalidInput("payload limit must be > 0");
  if (!(min_collision_radius >= 0.0)) throw InvalidInput("r_min must be >= 0");
  for (int i = 0; i < 3; ++i) {
    if (!(box_min[i] < box_max[i])) throw InvalidInput("workspace box needs p_min < p_max");
  }
  if (floor_z && (*floor_z < box_min.z() || *floor_z > box_max.z())) {
    throw InvalidInput("p_z_min must lie within the workspace box");
  }
  if (min_tilt && !(*min_tilt >= 0.0 && *min_tilt <= kPi)) {
    throw InvalidInput("phi_min must lie in [0, pi]");
  }
}

std::size_t ConstraintValues::size() const {
  return static_cast<std::size_t>(joint.size()) + 1 + 2 + 6 + (tilt ? 1 : 0);
}

VecX ConstraintValues::flat() const {
  VecX out(static_cast<Eigen::Index>(size()));
  Eigen::Index k = 0;
  out.segment(k, joint.size()) = joint;
  k += joint.size();
  out[k++] = payload;
  out[k++] = floor;
  out[k++] = collision;
  out.segment<6>(k) = box;
  k += 6;
  if (tilt) out[k++] = *tilt;
  return out;
}

double ConstraintValues::max() const {
  double m = std::max({payload, floor, collision, box.maxCoeff()});
  if (joint.size() > 0) m = std::max(m, joint.maxCoeff());
  if (tilt) m = std::max(m, *tilt);
  return m;
}

std::vector<std::string> ConstraintValues::labels(std::size_t n_joints, bool with_tilt) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n_joints; ++i) out.push_back("C1.upper[" + std::to_string(i) + "]");
  for (std::size_t i = 1; i <= n_joints; ++i) out.push_back("C1.lower[" + std::to_string(i) + "]");
  out.emplace_back("C2.payload");
  out.emplace_back("C3.floor");
  out.emplace_back("C3.collision");
  for (const char* axis : {"x", "y", "z"}) out.push_back(std::string("C4.max_") + axis);
  for (const char* axis : {"x", "y", "z"}) out.push_back(std::string("C4.min_") + axis);
  if (with_tilt) out.emplace_back("tilt");
  return out;
}

namespace {

double point_ray_distance(const Vec3& x, const Vec3& p, const Vec3& u) {
  const double t = std::max(0.0, (x - p).dot(u));
  return (x - (p + t * u)).norm();
}

double point_segment_distance(const Vec3& x, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double s = len2 > 0.0 ? std::clamp((x - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (x - (a + s * ab)).norm();
}

// Distance between segment [a, b] and ray p + t u (t >= 0, |u| = 1). The
// squared distance is a convex quadratic on [0,1] x [0,inf); the minimum lies
// at the interior stationary point or on one of the three boundary edges.
double segment_ray_distance(const Vec3& a, const Vec3& b, const Vec3& p, const Vec3& u) {
  double best = std::min({point_ray_distance(a, p, u), point_ray_distance(b, p, u),
                          point_segment_distance(p, a, b)});
  const Vec3 e = b - a;
  const Vec3 w = a - p;
  const double ee = e.dot(e), eu = e.dot(u), ew = e.dot(w), uw = u.dot(w);
  const double det = ee - eu * eu;  // |u| = 1
  if (det > 1e-12 * std::max(ee, 1.0)) {
    // minimize |w + s e - t u|^2
    const double s = (eu * uw - ew) / det;
    const double t = (ee * uw - eu * ew) / det;
    if (s >= 0.0 && s <= 1.0 && t >= 0.0) {
      best = std::min(best, (w + s * e - t * u).norm());
    }
  }
  return best;
}

}  // namespace

double loading_clearance(const ChainGeometry& chain, const Vec3& dir) {
  const double norm = dir.norm();
  if (!(norm > 0.0) || chain.points.size() < 2) return std::numeric_limits<double>::infinity();
  const Vec3 u = dir / norm;
  const Vec3& p = chain.points.back();
  // Last polyline vertex distinct from p; segments from there on touch p.
  std::size_t last = chain.points.size() - 1;
  while (last > 0 && (chain.points[last] - p).norm() <= 1e-9) --last;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < last; ++j) {
    best = std::min(best, segment_ray_distance(chain.points[j], chain.points[j + 1], p, u));
  }
  return best;
}

ConstraintValues evaluate(const RobotModel& model, const MeasurementConfig& config,
                          const ConstraintSet& cs, CalibrationMode mode) {
  const std::size_t n = model.n_joints();
  if (static_cast<std::size_t>(config.q.size()) != n) throw InvalidInput("joint vector does not match model");
  if (cs.joint_limits.size() != n) throw InvalidInput("constraint set does not match model");

  ConstraintValues v;
  v.joint.resize(static_cast<Eigen::Index>(2 * n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    v.joint[ii] = config.q[ii] - cs.joint_limits[i].upper;
    v.joint[static_cast<Eigen::Index>(n) + ii] = cs.joint_limits[i].lower - config.q[ii];
  }

  const ChainGeometry chain = chain_geometry(model, config.q);
  const Vec3& p = chain.points.back();
  v.box.head<3>() = p - cs.box_max;
  v.box.tail<3>() = cs.box_min - p;

  if (needs_wrench(mode)) {
    const Vec3 force = config.wrench ? Vec3(config.wrench->head<3>()) : Vec3::Zero();
    v.payload = force.norm() - cs.payload_limit;
    v.floor = cs.floor_z ? *cs.floor_z - p.z() : -std::numeric_limits<double>::infinity();
    v.collision = cs.min_collision_radius - loading_clearance(chain, force);
    if (cs.min_tilt) v.tilt = chain.tool_axis.z() - std::cos(*cs.min_tilt);
  } else if (cs.min_tilt) {
    v.tilt = 0.0;
  }
  return v;
}

namespace {

// F_max * dir with |F| <= F_max guaranteed in floating point, so the payload
// constraint of a sampled wrench is never positive by rounding.
Vec6 capped_wrench(double force, const Vec3& dir) {
  Vec6 w = Vec6::Zero();
  w.head<3>() = force * dir;
  const double shrink = std::nextafter(1.0, 0.0);
  while (w.head<3>().norm() > force) w.head<3>() *= shrink;
  return w;
}

}  // namespace

Vec6 wrench_from_direction(double force, double polar, double azimuth) {
  const Vec3 dir(std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth),
                 std::cos(polar));
  return capped_wrench(force, dir);
}

FeasibleSampler::FeasibleSampler(const RobotModel& model, const ConstraintSet& cs,
                                 CalibrationMode mode, std::uint64_t seed)
    : model_(model), cs_(cs), mode_(mode), rng_(seed) {
  cs.validate(model.n_joints());
}

MeasurementConfig FeasibleSampler::draw() {
  const std::size_t n = model_.n_joints();
  MeasurementConfig c;
  c.q.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_real_distribution<double> u(cs_.joint_limits[i].lower, cs_.joint_limits[i].upper);
    c.q[static_cast<Eigen::Index>(i)] = u(rng_);
  }
  if (needs_wrench(mode_)) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec3 dir;
    do {
      dir = Vec3(g(rng_), g(rng_), g(rng_));
    } while (dir.norm() < 1e-12);
    dir.normalize();
    c.wrench = capped_wrench(cs_.payload_limit, dir);
  }
  return c;
}

MeasurementConfig FeasibleSampler::next() {
  for (std::uint64_t rejected = 0; rejected < kMaxRejections; ++rejected) {
    MeasurementConfig c = draw();
    ++drawn_;
    if (evaluate(model_, c, cs_, mode_).feasible()) {
      ++accepted_;
      return c;
    }
  }
  throw InfeasibleProblem("no feasible measurement configuration found after " +
                          std::to_string(kMaxRejections) + " consecutive samples");
}

MeasurementConfig sample_feasible(const RobotModel& model, const ConstraintSet& cs,
                                  CalibrationMode mode, std::uint64_t seed) {
  FeasibleSampler sampler(model, cs, mode, seed);
  return sampler.next();
}

}  // namespace posecal
