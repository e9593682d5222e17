#include "support.hpp"

#include "posecal/simulate.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace posecal;
using namespace posecal::testing;

namespace {

SimulationSpec desk_spec(CalibrationMode mode, std::size_t m, std::size_t trials, std::uint64_t seed) {
  const DesignProblem p = presets::desk_6r_problem(m, mode);
  return SimulationSpec{.model = p.model,
                        .mode = mode,
                        .mask = p.mask,
                        .truth = std::nullopt,
                        .law = {},
                        .plan = sample_plan(p, 100 + m),
                        .test = p.test,
                        .sigma = p.sigma,
                        .n_trials = trials,
                        .seed = seed,
                        .generator = Generator::Linearized};
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("sampled truth respects ranges and mask") {
  const ParamMask mask = presets::desk_6r_mask(CalibrationMode::Combined);
  TruthLaw law;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const ParamVector t = sample_truth(6, law, mask, s);
    for (std::size_t j = 0; j < 18; ++j) {
      const double v = t.values()[static_cast<Eigen::Index>(j)];
      if (!mask.active(j)) {
        CHECK(v == 0.0);
      } else if (j < 6) {
        CHECK(std::abs(v) <= law.dl_range);
      } else if (j < 12) {
        CHECK(std::abs(v) <= law.dq_range);
      } else {
        CHECK(v >= law.k_min);
        CHECK(v <= law.k_max);
      }
    }
  }
  CHECK(sample_truth(6, law, mask, 3).values() == sample_truth(6, law, mask, 3).values());
  TruthLaw bad;
  bad.k_min = 2e-6;
  CHECK_THROWS_AS(sample_truth(6, bad, mask, 0), InvalidInput);
}

TEST_CASE("noise-free linearized measurements equal the observation model") {
  const DesignProblem p = presets::desk_6r_problem(6, CalibrationMode::Combined);
  const ExperimentPlan plan = sample_plan(p, 4);
  std::mt19937_64 rng(2);
  const ParamVector truth = random_delta(6, rng);
  const auto recs = simulate_measurements(p.model, truth, plan, 0.0, 9);
  REQUIRE(recs.size() == plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const Vec3 expected = full_observation_block(p.model, plan.configs[i], plan.mode) * truth.values();
    CHECK((recs[i].dp - expected).norm() < 1e-12);
  }
}

TEST_CASE("nonlinear generator agrees with the linear one to first order") {
  const DesignProblem p = presets::desk_6r_problem(6);
  const ExperimentPlan plan = sample_plan(p, 5);
  std::mt19937_64 rng(3);
  ParamVector truth = random_delta(6, rng);
  for (std::size_t j = 0; j < 6; ++j) truth.k(j) = 0.0;
  const double eps = 1e-4;
  ParamVector small = truth;
  small.values() *= eps;
  const auto lin = simulate_measurements(p.model, small, plan, 0.0, 1, Generator::Linearized);
  const auto non = simulate_measurements(p.model, small, plan, 0.0, 1, Generator::Nonlinear);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const Vec3 fk = oracle_fk(p.model, plan.configs[i].q, &small) - oracle_fk(p.model, plan.configs[i].q);
    CHECK((non[i].dp - fk).norm() < 1e-9);
    CHECK((non[i].dp - lin[i].dp).norm() <= 1e-3 * lin[i].dp.norm() + 1e-12);
  }
}

TEST_CASE("measurement noise is reproducible and has the requested spread") {
  const DesignProblem p = presets::desk_6r_problem(1);
  const ExperimentPlan plan = sample_plan(p, 6).repeated(33334);
  const ParamVector zero(6);
  const double sigma = 0.03;
  const auto a = simulate_measurements(p.model, zero, plan, sigma, 77);
  const auto b = simulate_measurements(p.model, zero, plan, sigma, 77);
  const auto c = simulate_measurements(p.model, zero, plan, sigma, 78);
  double sum = 0.0, sq = 0.0;
  bool same = true, differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same = same && a[i].dp == b[i].dp;
    differs = differs || a[i].dp != c[i].dp;
    sum += a[i].dp.sum();
    sq += a[i].dp.squaredNorm();
  }
  CHECK(same);
  CHECK(differs);
  const double n = 3.0 * static_cast<double>(a.size());
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean) < 4.0 * sigma / std::sqrt(n));
  CHECK(sd == doctest::Approx(sigma).epsilon(0.01));
}

TEST_CASE("zero noise gives zero empirical error") {
  SimulationSpec spec = desk_spec(CalibrationMode::Combined, 8, 20, 1);
  spec.sigma = 0.0;
  const SimulationReport r = monte_carlo_validation(spec);
  CHECK(r.empirical_rho0 < 1e-9);
  CHECK(r.predicted_rho0 == 0.0);
  CHECK(std::isnan(r.ratio));
}

TEST_CASE("empirical accuracy matches the prediction") {
  for (CalibrationMode mode : {CalibrationMode::Geometric, CalibrationMode::Combined}) {
    CAPTURE(to_string(mode));
    const SimulationReport r = monte_carlo_validation(desk_spec(mode, 12, 4000, 21));
    CHECK(r.ratio > 0.95);
    CHECK(r.ratio < 1.05);
    CHECK(r.covariance_max_rel_error < 0.1);
    CHECK(r.estimate_bias_max_z < 5.0);
    CHECK(r.dp_mean_max_z < 5.0);
    CHECK(r.predicted_rho0 == doctest::Approx(oracle_rho0(presets::desk_6r(), desk_spec(mode, 12, 1, 0).plan,
                                                          presets::desk_6r_test_poses(mode), kDefaultSigma,
                                                          presets::desk_6r_mask(mode)))
                                  .epsilon(1e-8));
  }
}

TEST_CASE("empirical error scales linearly with sigma") {
  SimulationSpec spec = desk_spec(CalibrationMode::Geometric, 10, 200, 5);
  const SimulationReport a = monte_carlo_validation(spec);
  spec.sigma *= 2.0;
  const SimulationReport b = monte_carlo_validation(spec);
  CHECK(b.empirical_rho0 == doctest::Approx(2.0 * a.empirical_rho0).epsilon(1e-9));
  CHECK(b.predicted_rho0 == doctest::Approx(2.0 * a.predicted_rho0).epsilon(1e-12));
}

TEST_CASE("linearized estimation error does not depend on the truth") {
  SimulationSpec spec = desk_spec(CalibrationMode::Combined, 8, 100, 9);
  std::mt19937_64 rng(4);
  spec.truth = random_delta(6, rng);
  const SimulationReport a = monte_carlo_validation(spec);
  spec.truth = ParamVector(6);
  const SimulationReport b = monte_carlo_validation(spec);
  CHECK(a.empirical_rho0 == doctest::Approx(b.empirical_rho0).epsilon(1e-9));
}

TEST_CASE("monte carlo is deterministic across thread counts") {
  const SimulationSpec spec = desk_spec(CalibrationMode::Combined, 8, 64, 13);
  const SimulationReport a = monte_carlo_validation(spec, Execution::serial());
  const SimulationReport b = monte_carlo_validation(spec, Execution{4});
  CHECK(a.empirical_rho0 == b.empirical_rho0);
  CHECK(a.truth.values() == b.truth.values());
  CHECK(a.error_covariance == b.error_covariance);
}

TEST_CASE("monte carlo input validation") {
  SimulationSpec spec = desk_spec(CalibrationMode::Geometric, 6, 10, 1);
  spec.n_trials = 0;
  CHECK_THROWS_AS(monte_carlo_validation(spec), InvalidInput);
  spec = desk_spec(CalibrationMode::Geometric, 6, 10, 1);
  spec.sigma = -1.0;
  CHECK_THROWS_AS(monte_carlo_validation(spec), InvalidInput);
  spec = desk_spec(CalibrationMode::Geometric, 6, 10, 1);
  spec.mode = CalibrationMode::Combined;
  CHECK_THROWS_AS(monte_carlo_validation(spec), InvalidInput);
  spec = desk_spec(CalibrationMode::Geometric, 1, 10, 1);
  CHECK_THROWS(monte_carlo_validation(spec));
}

TEST_CASE("summary text and generator names") {
  const SimulationReport r = monte_carlo_validation(desk_spec(CalibrationMode::Geometric, 6, 50, 2));
  std::ostringstream os;
  write_summary(os, r);
  CHECK(os.str().find("ratio") != std::string::npos);
  CHECK(parse_generator("nonlinear") == Generator::Nonlinear);
  CHECK(to_string(Generator::Linearized) == "linearized");
  CHECK_THROWS_AS(parse_generator("quadratic"), InvalidInput);
}

}
