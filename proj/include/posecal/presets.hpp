#pragma once

#include "posecal/optimize.hpp"

#include <string>
#include <vector>

namespace posecal::presets {

// Desk-scale 6R stand-in (roughly 2.7 m reach, industrial-style joint
// ranges). Illustrative geometry, not a manufacturer data set.
RobotModel desk_6r();
ConstraintSet desk_6r_constraints();
TestPoseSet desk_6r_test_poses(CalibrationMode mode);
// Nine geometric parameters with the largest scaled sensitivity at the test
// pose: dl1..dl6, dq1..dq3.
std::vector<std::string> desk_6r_mask_names();
// Default mask per mode: the nine names above in geometric mode; otherwise
// every parameter except dq6 and k6, which do not move the end-effector
// point (it lies on the axis of joint 6).
ParamMask desk_6r_mask(CalibrationMode mode);
DesignProblem desk_6r_problem(std::size_t m, CalibrationMode mode = CalibrationMode::Geometric);

// Planar 2R arm, unit-metre links in the xy plane.
RobotModel planar_2r();

// Discrete elastostatic toy problem: planar 2R, m = 2, five levels for each
// of (q1, q2, polar, azimuth), i.e. 5^8 = 390625 candidate plans.
DesignProblem planar_2r_toy();

}  // namespace posecal::presets
