#include "posecal/presets.hpp"

namespace posecal::presets {

RobotModel desk_6r() {
  std::vector<Link> links = {
      {deg2rad(-90.0), 350.0, 675.0, 0.0, LengthAxis::A},
      {0.0, 1050.0, 0.0, 0.0, LengthAxis::A},
      {deg2rad(-90.0), 41.0, 0.0, 0.0, LengthAxis::A},
      {deg2rad(90.0), 0.0, 1100.0, 0.0, LengthAxis::D},
      {deg2rad(-90.0), 0.0, 0.0, 0.0, LengthAxis::D},
      {0.0, 0.0, 200.0, 0.0, LengthAxis::D},
  };
  std::vector<JointLimit> limits;
  for (double deg : {185.0, 140.0, 155.0, 350.0, 122.0, 350.0}) {
    limits.push_back({deg2rad(-deg), deg2rad(deg)});
  }
  return RobotModel(std::move(links), std::move(limits), 1000.0);
}

ConstraintSet desk_6r_constraints() {
  ConstraintSet cs = ConstraintSet::from_model(desk_6r());
  cs.floor_z = 100.0;
  cs.min_collision_radius = 100.0;
  cs.box_min = Vec3(400.0, -1500.0, 100.0);
  cs.box_max = Vec3(2600.0, 1500.0, 2200.0);
  return cs;
}

TestPoseSet desk_6r_test_poses(CalibrationMode mode) {
  MeasurementConfig pose;
  pose.q.resize(6);
  pose.q << 0.0, deg2rad(-60.0), deg2rad(30.0), 0.0, deg2rad(45.0), 0.0;
  if (needs_wrench(mode)) {
    pose.wrench = Vec6::Zero();
    (*pose.wrench)[2] = -desk_6r().payload_limit();
  }
  return TestPoseSet{{pose}};
}

std::vector<std::string> desk_6r_mask_names() {
  return {"dl1", "dl2", "dl3", "dl4", "dl5", "dl6", "dq1", "dq2", "dq3"};
}

ParamMask desk_6r_mask(CalibrationMode mode) {
  if (mode == CalibrationMode::Geometric) {
    const auto names = desk_6r_mask_names();
    return ParamMask::from_names(6, names);
  }
  std::vector<bool> active(18, false);
  for (std::size_t j = 0; j < 18; ++j) {
    const bool geometric = j < 12;
    if (geometric && mode == CalibrationMode::Elastostatic) continue;
    active[j] = (j != 11 && j != 17);
  }
  return ParamMask(std::move(active));
}

DesignProblem desk_6r_problem(std::size_t m, CalibrationMode mode) {
  return DesignProblem{desk_6r(),
                       mode,
                       desk_6r_mask(mode),
                       desk_6r_test_poses(mode),
                       kDefaultSigma,
                       desk_6r_constraints(),
                       m,
                       std::nullopt};
}

RobotModel planar_2r() {
  std::vector<Link> links = {{0.0, 1000.0, 0.0, 0.0, LengthAxis::A},
                             {0.0, 1000.0, 0.0, 0.0, LengthAxis::A}};
  std::vector<JointLimit> limits = {{deg2rad(-90.0), deg2rad(90.0)},
                                    {deg2rad(-150.0), deg2rad(150.0)}};
  return RobotModel(std::move(links), std::move(limits), 500.0);
}

DesignProblem planar_2r_toy() {
  const RobotModel model = planar_2r();
  ConstraintSet cs = ConstraintSet::from_model(model);
  cs.min_collision_radius = 50.0;
  cs.box_min = Vec3(-2500.0, -1500.0, -1.0);
  cs.box_max = Vec3(2500.0, 2500.0, 1.0);

  MeasurementConfig test;
  test.q = Vec3(deg2rad(30.0), deg2rad(60.0), 0.0).head<2>();
  test.wrench = Vec6::Zero();
  (*test.wrench)[1] = -model.payload_limit();

  const std::vector<std::pair<double, double>> bounds = {
      {model.limits()[0].lower, model.limits()[0].upper},
      {model.limits()[1].lower, model.limits()[1].upper},
      {0.0, kPi},
      {-kPi, kPi}};
  return DesignProblem{model,
                       CalibrationMode::Elastostatic,
                       ParamMask::for_mode(2, CalibrationMode::Elastostatic),
                       TestPoseSet{{test}},
                       kDefaultSigma,
                       cs,
                       2,
                       Lattice::uniform(bounds, 5)};
}

}  // namespace posecal::presets
