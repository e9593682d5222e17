#include "support.hpp"
#include "temp_dir.hpp"

#include "posecal/cli.hpp"
#include "posecal/io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace posecal;
using namespace posecal::testing;
using nlohmann::json;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "posecal");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Small, fast variant of the toy configuration written into `dir`.
std::string toy_config(const TempDir& dir, const std::function<void(json&)>& edit = {}) {
  json j = json::parse(io::read_file(config_dir() / "planar2r_toy.json"));
  j["optimizer"]["genetic"] = {{"population", 20}, {"generations", 5}};
  j["simulation"]["trials"] = 200;
  j.erase("output_dir");
  if (edit) edit(j);
  const auto path = dir / "toy.json";
  std::ofstream(path) << j.dump(2);
  return path.string();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("plan then evaluate reproduces rho0 exactly") {
  TempDir dir;
  const std::string cfg = toy_config(dir);
  const std::string out = (dir / "run").string();
  const Run p = cli({"plan", "--config", cfg, "--out", out});
  REQUIRE(p.code == kExitOk);
  CHECK(std::filesystem::exists(dir / "run/trace.csv"));
  const json plan = json::parse(io::read_file(dir / "run/plan.json"));
  CHECK(plan["schema_version"] == 1);
  CHECK(plan["constraints"]["feasible"] == true);
  const double rho = plan["rho0"].get<double>();

  const Run e = cli({"evaluate", "--config", cfg, "--plan", out + "/plan.json"});
  REQUIRE(e.code == kExitOk);
  std::ostringstream expect;
  expect.precision(17);
  expect << "rho0 = " << rho << " mm";
  CHECK(e.out.find(expect.str()) != std::string::npos);
  CHECK(e.out.find("VIOLATED") == std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "run/evaluation.json"));
}

TEST_CASE("evaluate with repeat divides rho0 by sqrt(k)") {
  TempDir dir;
  const std::string cfg = toy_config(dir);
  const std::string out = (dir / "run").string();
  REQUIRE(cli({"plan", "--config", cfg, "--out", out}).code == kExitOk);
  REQUIRE(cli({"evaluate", "--config", cfg, "--plan", out + "/plan.json", "--out", out}).code == kExitOk);
  const double r1 = json::parse(io::read_file(dir / "run/evaluation.json"))["rho0"].get<double>();
  REQUIRE(cli({"evaluate", "--config", cfg, "--plan", out + "/plan.json", "--out", out, "--repeat", "4"}).code ==
          kExitOk);
  const json e4 = json::parse(io::read_file(dir / "run/evaluation.json"));
  CHECK(e4["m"] == 8);
  CHECK(e4["rho0"].get<double>() == doctest::Approx(r1 / 2.0).epsilon(1e-12));
  CHECK(cli({"evaluate", "--config", cfg, "--plan", out + "/plan.json", "--repeat", "0"}).code == kExitUsage);
}

TEST_CASE("plan output is identical across thread counts and reruns") {
  TempDir dir;
  const std::string cfg = toy_config(dir);
  REQUIRE(cli({"plan", "--config", cfg, "--out", (dir / "a").string(), "--threads", "1"}).code == kExitOk);
  REQUIRE(cli({"plan", "--config", cfg, "--out", (dir / "b").string(), "--threads", "4"}).code == kExitOk);
  REQUIRE(cli({"plan", "--config", cfg, "--out", (dir / "c").string()}).code == kExitOk);
  const std::string a = io::read_file(dir / "a/plan.json");
  CHECK(a == io::read_file(dir / "b/plan.json"));
  CHECK(a == io::read_file(dir / "c/plan.json"));
  REQUIRE(cli({"plan", "--config", cfg, "--out", (dir / "d").string(), "--seed", "2"}).code == kExitOk);
  CHECK(json::parse(io::read_file(dir / "d/plan.json"))["seed"] == 2);
}

TEST_CASE("too few poses is reported as unidentifiable") {
  TempDir dir;
  const std::string cfg = toy_config(dir, [](json& j) { j["optimizer"]["m"] = 1; j["mode"] = "combined"; j.erase("mask"); });
  const Run r = cli({"plan", "--config", cfg, "--out", (dir / "run").string()});
  CHECK(r.code == kExitFailure);
  CHECK(r.err.find("unidentifiable") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "run/plan.json"));
}

TEST_CASE("evaluating a degenerate plan fails as unidentifiable") {
  TempDir dir;
  const std::string cfg = toy_config(dir);
  std::ofstream(dir / "plan.json") << R"({"schema_version": 1, "mode": "elastostatic", "poses": [
    {"q_deg": [0, 0], "force": [500, 0, 0]}, {"q_deg": [0, 0], "force": [-500, 0, 0]}]})";
  const Run r = cli({"evaluate", "--config", cfg, "--plan", (dir / "plan.json").string()});
  CHECK(r.code == kExitFailure);
  CHECK(r.err.find("unidentifiable") != std::string::npos);
}

TEST_CASE("evaluate flags constraint violations") {
  TempDir dir;
  const std::string cfg = toy_config(dir);
  std::ofstream(dir / "plan.json") << R"({"schema_version": 1, "mode": "elastostatic", "poses": [
    {"q_deg": [10, 40], "force": [0, -500, 0]}, {"q_deg": [-60, 170], "force": [500, 0, 0]}]})";
  const Run r = cli({"evaluate", "--config", cfg, "--plan", (dir / "plan.json").string(), "--out",
                     dir.path().string()});
  REQUIRE(r.code == kExitOk);
  const json e = json::parse(io::read_file(dir / "evaluation.json"));
  CHECK(e["feasible"] == false);
  CHECK(r.out.find("VIOLATED") != std::string::npos);
  CHECK(e["constraints"][1]["violated"][0].get<std::string>().rfind("C1", 0) == 0);
  CHECK(e["constraints"][0]["feasible"] == true);
}

TEST_CASE("usage and input errors") {
  TempDir dir;
  const std::string cfg = toy_config(dir);
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"plan"}).code == kExitUsage);
  CHECK(cli({"plan", "--config", (dir / "none.json").string()}).code == kExitUsage);
  CHECK(cli({"plan", "--config", cfg, "--threads", "-2"}).code == kExitUsage);
  CHECK(cli({"launch", "--config", cfg}).code == kExitUsage);
  const Run missing = cli({"evaluate", "--config", cfg, "--plan", (dir / "none.json").string()});
  CHECK(missing.code == kExitUsage);
  CHECK(missing.err.find("none.json") != std::string::npos);
  CHECK(cli({"--help"}).code == kExitOk);

  std::ofstream(dir / "bad.json") << R"({"schema_version": 1, "robot": {"links": []}})";
  const Run bad = cli({"plan", "--config", (dir / "bad.json").string()});
  CHECK(bad.code == kExitUsage);
  CHECK(bad.err.find("/robot") != std::string::npos);

  const std::string noseed = toy_config(dir, [](json& j) { j["optimizer"].erase("seed"); });
  const Run ns = cli({"plan", "--config", noseed, "--out", (dir / "x").string()});
  CHECK(ns.code == kExitUsage);
  CHECK(ns.err.find("/optimizer/seed") != std::string::npos);
}

TEST_CASE("plan mode must match the configuration") {
  TempDir dir;
  const std::string cfg = toy_config(dir);
  std::ofstream(dir / "plan.json") << R"({"schema_version": 1, "mode": "geometric", "poses": [{"q_deg": [0, 45]}]})";
  CHECK(cli({"evaluate", "--config", cfg, "--plan", (dir / "plan.json").string()}).code == kExitUsage);
}

TEST_CASE("simulate writes its outputs and agrees with the prediction") {
  TempDir dir;
  const std::string cfg = toy_config(dir);
  const std::string out = (dir / "run").string();
  REQUIRE(cli({"plan", "--config", cfg, "--out", out}).code == kExitOk);
  const Run s = cli({"simulate", "--config", cfg, "--plan", out + "/plan.json", "--out", out});
  REQUIRE(s.code == kExitOk);
  const json j = json::parse(io::read_file(dir / "run/simulation.json"));
  CHECK(j["schema_version"] == 1);
  const double ratio = j["ratio"].get<double>();
  CHECK(ratio > 0.9);
  CHECK(ratio < 1.1);
  CHECK(std::filesystem::exists(dir / "run/summary.txt"));
  std::istringstream csv(io::read_file(dir / "run/measurements.csv"));
  CHECK(read_measurements_csv(csv, 2).size() == 2);
  REQUIRE(cli({"simulate", "--config", cfg, "--plan", out + "/plan.json", "--out", (dir / "again").string(),
               "--threads", "1"})
              .code == kExitOk);
  CHECK(io::read_file(dir / "run/simulation.json") == io::read_file(dir / "again/simulation.json"));
}

TEST_CASE("compare writes one row per strategy and factorization") {
  TempDir dir;
  const std::string cfg = toy_config(dir, [](json& j) {
    j["mode"] = "geometric";
    j.erase("mask");
    j["optimizer"]["m"] = 4;
    j["optimizer"].erase("lattice");
    j["optimizer"]["n_starts"] = 2;
    j["optimizer"]["random_samples"] = 50;
    j["optimizer"]["factorizations"] = {"4x1", "2x2"};
    j["optimizer"]["compare_strategies"] = {"random", "gradient"};
  });
  const Run r = cli({"compare", "--config", cfg, "--out", dir.path().string()});
  REQUIRE(r.code == kExitOk);
  const std::string csv = io::read_file(dir / "compare.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(json::parse(io::read_file(dir / "compare.json"))["rows"].size() == 4);
  CHECK(std::filesystem::exists(dir / "compare.txt"));
}

TEST_CASE("output directory defaults to the config's output_dir") {
  TempDir dir;
  const std::string cfg = toy_config(dir, [](json& j) { j["output_dir"] = "results"; });
  REQUIRE(cli({"plan", "--config", cfg}).code == kExitOk);
  CHECK(std::filesystem::exists(dir / "results/plan.json"));
}

}
