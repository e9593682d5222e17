#include "support.hpp"

#include <doctest.h>

#include <algorithm>

using namespace posecal;
using namespace posecal::testing;

namespace {

TestPoseSet desk_test() { return presets::desk_6r_test_poses(CalibrationMode::Geometric); }

ParamMask nine() {
  const auto names = presets::desk_6r_mask_names();
  return ParamMask::from_names(6, names);
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_SUITE("criterion") {

TEST_CASE("identity information and identity test block") {
  const auto r = rho0_from_info(MatX::Identity(3, 3), MatX::Identity(3, 3), 0.03);
  REQUIRE(r.has_value());
  CHECK(*r == doctest::Approx(0.03 * std::sqrt(3.0)).epsilon(1e-14));
  CHECK(*r == doctest::Approx(0.051962).epsilon(1e-5));
}

TEST_CASE("info_matrix matches dense stacking and is additive under repetition") {
  const RobotModel m = presets::desk_6r();
  std::mt19937_64 rng(20);
  const ParamMask mask = ParamMask::for_mode(6, CalibrationMode::Combined);
  const ExperimentPlan plan = random_plan(m, CalibrationMode::Combined, 7, rng);
  const InfoMatrix info = info_matrix(m, plan, mask);
  CHECK(info.m == 7);
  MatX S(21, 18);
  for (std::size_t i = 0; i < 7; ++i) S.middleRows(static_cast<Eigen::Index>(3 * i), 3) = full_observation_block(m, plan.configs[i], plan.mode);
  const MatX dense = S.transpose() * S;
  for (Eigen::Index i = 0; i < 18; ++i) {
    for (Eigen::Index j = 0; j < 18; ++j) {
      CHECK(std::abs(info.M(i, j) - dense(i, j)) <= 1e-10 * std::sqrt(dense(i, i) * dense(j, j)));
    }
  }
  CHECK(info.M == info.M.transpose());
  const InfoMatrix rep = info_matrix(m, plan.repeated(3), mask);
  CHECK((rep.M - 3.0 * info.M).cwiseAbs().maxCoeff() <= 1e-12 * info.M.cwiseAbs().maxCoeff());
  CHECK_THROWS_AS(info_matrix(m, ExperimentPlan{}, mask), InvalidInput);
}

TEST_CASE("rho0 agrees with the dense-stacking oracle") {
  const RobotModel m = presets::desk_6r();
  std::mt19937_64 rng(21);
  for (auto mode : {CalibrationMode::Geometric, CalibrationMode::Elastostatic, CalibrationMode::Combined}) {
    const ParamMask mask = mode == CalibrationMode::Geometric ? nine() : presets::desk_6r_mask(mode);
    const TestPoseSet test = presets::desk_6r_test_poses(mode);
    for (int t = 0; t < 5; ++t) {
      const ExperimentPlan plan = random_plan(m, mode, 8, rng);
      CHECK(rel(rho0(m, plan, test, 0.03, mask), oracle_rho0(m, plan, test, 0.03, mask)) < 1e-8);
    }
  }
}

TEST_CASE("repetition law") {
  const RobotModel m = presets::desk_6r();
  std::mt19937_64 rng(22);
  const ExperimentPlan plan = random_plan(m, CalibrationMode::Geometric, 6, rng);
  const double base = rho0(m, plan, desk_test(), 0.03, nine());
  for (int k : {2, 3, 4, 10}) {
    const double rep = rho0(m, plan.repeated(static_cast<std::size_t>(k)), desk_test(), 0.03, nine());
    CHECK(rel(rep, rho0_factorized(base, k)) < 1e-12);
  }
  CHECK(rel(rho0(m, plan.repeated(4), desk_test(), 0.03, nine()), base / 2.0) < 1e-12);
}

TEST_CASE("rho0_factorized") {
  CHECK(rho0_factorized(0.0637, 1) == 0.0637);
  CHECK(rho0_factorized(0.0637, 4) == doctest::Approx(0.03185).epsilon(1e-12));
  // Table-level rounding: 0.0637 / 2 prints as 0.0319 at four decimals.
  CHECK(std::round(rho0_factorized(0.0637, 4) * 1e4) / 1e4 == doctest::Approx(0.0319).epsilon(1e-12));
  CHECK_THROWS_AS(rho0_factorized(0.0637, 0), InvalidInput);
  CHECK_THROWS_AS(rho0_factorized(0.0, 2), InvalidInput);
}

TEST_CASE("linear in sigma") {
  const RobotModel m = presets::desk_6r();
  std::mt19937_64 rng(23);
  const ExperimentPlan plan = random_plan(m, CalibrationMode::Geometric, 6, rng);
  const double a = rho0(m, plan, desk_test(), 0.03, nine());
  CHECK(rho0(m, plan, desk_test(), 0.06, nine()) == 2.0 * a);
  CHECK(rho0(m, plan, desk_test(), 0.0, nine()) == 0.0);
  CHECK_THROWS_AS(rho0(m, plan, desk_test(), -1.0, nine()), InvalidInput);
}

TEST_CASE("appending a measurement never increases rho0") {
  const RobotModel m = presets::desk_6r();
  std::mt19937_64 rng(24);
  for (int t = 0; t < 50; ++t) {
    ExperimentPlan plan = random_plan(m, CalibrationMode::Geometric, 4, rng);
    const double before = rho0(m, plan, desk_test(), 0.03, nine());
    plan.configs.push_back(random_plan(m, CalibrationMode::Geometric, 1, rng).configs[0]);
    CHECK(rho0(m, plan, desk_test(), 0.03, nine()) <= before * (1 + 1e-12));
  }
}

TEST_CASE("plan order does not matter") {
  const RobotModel m = presets::desk_6r();
  std::mt19937_64 rng(25);
  ExperimentPlan plan = random_plan(m, CalibrationMode::Combined, 7, rng);
  const TestPoseSet test = presets::desk_6r_test_poses(CalibrationMode::Combined);
  const ParamMask mask = presets::desk_6r_mask(CalibrationMode::Combined);
  const double a = rho0(m, plan, test, 0.03, mask);
  std::reverse(plan.configs.begin(), plan.configs.end());
  CHECK(rho0(m, plan, test, 0.03, mask) == a);
  std::shuffle(plan.configs.begin(), plan.configs.end(), rng);
  CHECK(rho0(m, plan, test, 0.03, mask) == a);
}

TEST_CASE("test-pose sets aggregate by mean square") {
  const RobotModel m = presets::desk_6r();
  std::mt19937_64 rng(26);
  const ExperimentPlan plan = random_plan(m, CalibrationMode::Geometric, 6, rng);
  TestPoseSet a = desk_test();
  TestPoseSet b{{{random_q(m, rng), std::nullopt}}};
  TestPoseSet both{{a.poses[0], b.poses[0]}};
  const double ra = rho0(m, plan, a, 0.03, nine());
  const double rb = rho0(m, plan, b, 0.03, nine());
  CHECK(rel(rho0(m, plan, both, 0.03, nine()), std::sqrt((ra * ra + rb * rb) / 2.0)) < 1e-12);
  CHECK_THROWS_AS(rho0(m, plan, TestPoseSet{}, 0.03, nine()), InvalidInput);
}

TEST_CASE("rho0 is positive and bounded below") {
  const RobotModel m = presets::desk_6r();
  std::mt19937_64 rng(27);
  const ExperimentPlan plan = random_plan(m, CalibrationMode::Geometric, 6, rng);
  CHECK(rho0(m, plan, desk_test(), 0.03, nine()) > 0.0);
}

TEST_CASE("singular information is an error, never a number") {
  const RobotModel m = presets::desk_6r();
  std::mt19937_64 rng(28);
  const ExperimentPlan one = random_plan(m, CalibrationMode::Geometric, 1, rng);
  CHECK_THROWS_AS(rho0(m, one, desk_test(), 0.03, nine()), Unidentifiable);
  const ExperimentPlan same = one.repeated(5);
  CHECK_THROWS_AS(rho0(m, same, desk_test(), 0.03, nine()), Unidentifiable);
  const Rho0Evaluator ev(m, CalibrationMode::Geometric, nine(), desk_test(), 0.03);
  CHECK_FALSE(ev.try_evaluate(same.configs).has_value());
  CHECK_FALSE(rho0_from_info(MatX::Zero(3, 3), MatX::Identity(3, 3), 0.03).has_value());
}

TEST_CASE("evaluator and free function agree") {
  const RobotModel m = presets::desk_6r();
  std::mt19937_64 rng(29);
  const ExperimentPlan plan = random_plan(m, CalibrationMode::Geometric, 6, rng);
  const Rho0Evaluator ev(m, CalibrationMode::Geometric, nine(), desk_test(), 0.03);
  CHECK(ev.evaluate(plan.configs) == rho0(m, plan, desk_test(), 0.03, nine()));
  CHECK(ev.from_info(info_matrix(m, plan, nine()).M) == ev.evaluate(plan.configs));
}

}
