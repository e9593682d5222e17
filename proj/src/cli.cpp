#include "posecal/cli.hpp"

#include "posecal/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iomanip>
#include <ostream>
#include <sstream>

namespace posecal {

namespace {

namespace fs = std::filesystem;

struct Args {
  std::string config;
  std::string plan;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t repeat = 1;
  int threads = 0;
};

struct Context {
  io::RunConfig cfg;
  fs::path out_dir;
  Execution exec;
};

Context load(const Args& a) {
  Context ctx{io::load_config(a.config), {}, Execution{a.threads}};
  if (a.seed) ctx.cfg.seed = a.seed;
  if (!a.out.empty()) {
    ctx.out_dir = a.out;
  } else if (ctx.cfg.output_dir) {
    ctx.out_dir = ctx.cfg.source.parent_path() / *ctx.cfg.output_dir;
  } else {
    ctx.out_dir = ".";
  }
  return ctx;
}

std::uint64_t require_seed(const io::RunConfig& cfg) {
  if (!cfg.seed) {
    throw ConfigError(cfg.source.string() + ": /optimizer/seed: required field is missing (or pass --seed)");
  }
  return *cfg.seed;
}

DesignProblem require_problem(const io::RunConfig& cfg) {
  if (cfg.m == 0) throw ConfigError(cfg.source.string() + ": /optimizer/m: required field is missing");
  DesignProblem p = cfg.problem();
  p.validate();
  return p;
}

ExperimentPlan load_checked_plan(const io::RunConfig& cfg, const std::string& path) {
  ExperimentPlan plan = io::load_plan(path, cfg.model);
  if (plan.mode != cfg.mode) {
    throw InvalidInput(path + ": plan mode '" + std::string(to_string(plan.mode)) +
                       "' does not match config mode '" + std::string(to_string(cfg.mode)) + "'");
  }
  return plan;
}

int cmd_plan(const Args& a, std::ostream& out) {
  Context ctx = load(a);
  const std::uint64_t seed = require_seed(ctx.cfg);
  const DesignProblem problem = require_problem(ctx.cfg);
  DesignReport report = run_strategy(problem, ctx.cfg.strategy, seed, ctx.cfg.options, ctx.exec);
  // Report the accuracy of the plan as stored (degrees), so that evaluating
  // the written file reproduces it exactly.
  const ExperimentPlan stored = io::parse_plan(io::plan_json(ctx.cfg, report), "plan.json", ctx.cfg.model);
  report.rho0_best = Rho0Evaluator(problem.model, problem.mode, problem.mask, problem.test, problem.sigma)
                         .evaluate(stored.configs);
  io::write_atomic(ctx.out_dir / "plan.json", io::plan_json(ctx.cfg, report));
  io::write_atomic(ctx.out_dir / "trace.csv", io::trace_csv(report.trace));
  out << std::setprecision(10) << to_string(report.strategy) << ": m = " << report.best_plan.size()
      << ", rho0 = " << report.rho0_best << " mm, " << report.evaluations << " evaluations\n"
      << "wrote " << (ctx.out_dir / "plan.json").string() << " and "
      << (ctx.out_dir / "trace.csv").string() << '\n';
  return kExitOk;
}

int cmd_evaluate(const Args& a, std::ostream& out) {
  Context ctx = load(a);
  const io::RunConfig& cfg = ctx.cfg;
  if (a.repeat < 1) throw InvalidInput("--repeat must be >= 1");
  const ExperimentPlan base = load_checked_plan(cfg, a.plan);
  const ExperimentPlan plan = base.repeated(a.repeat);

  const auto blocks = build_blocks(cfg.model, plan, cfg.mask);
  const MatX normal = normal_matrix(blocks);
  const auto names = cfg.mask.names();
  const IdentifiabilityReport ident = assess_identifiability(normal, names);
  require_identifiable(normal, names);
  const double rho = Rho0Evaluator(cfg.model, cfg.mode, cfg.mask, cfg.test, cfg.sigma).evaluate(plan.configs);

  nlohmann::ordered_json j;
  j["schema_version"] = io::kSchemaVersion;
  j["kind"] = "evaluation";
  j["mode"] = std::string(to_string(cfg.mode));
  j["mask"] = names;
  j["sigma"] = cfg.sigma;
  j["m"] = plan.size();
  j["repeat"] = a.repeat;
  j["rho0"] = rho;
  j["scaled_condition"] = ident.scaled_condition;

  std::ostringstream text;
  text << std::setprecision(17) << "rho0 = " << rho << " mm\n"
       << std::setprecision(6) << "scaled condition number = " << ident.scaled_condition << '\n'
       << "poses = " << plan.size() << " (" << base.size() << " x " << a.repeat << ")\n";

  const bool with_tilt = cfg.constraints.min_tilt.has_value();
  const auto labels = ConstraintValues::labels(cfg.model.n_joints(), with_tilt);
  nlohmann::ordered_json poses = nlohmann::ordered_json::array();
  bool all_ok = true;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const ConstraintValues cv = evaluate(cfg.model, base.configs[i], cfg.constraints, cfg.mode);
    const VecX flat = cv.flat();
    // C2 and C3 are identically zero in geometric mode; report the binding
    // constraint among the informative ones.
    Eigen::Index worst = -1;
    for (Eigen::Index c = 0; c < flat.size(); ++c) {
      const bool loaded_only = labels[static_cast<std::size_t>(c)].starts_with("C2") ||
                               labels[static_cast<std::size_t>(c)].starts_with("C3");
      if (loaded_only && !needs_wrench(cfg.mode)) continue;
      if (worst < 0 || flat[c] > flat[worst]) worst = c;
    }
    const bool ok = flat[worst] <= kFeasibilityTol;
    all_ok = all_ok && ok;
    nlohmann::ordered_json violated = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < flat.size(); ++c) {
      if (flat[c] > kFeasibilityTol) violated.push_back(labels[static_cast<std::size_t>(c)]);
    }
    poses.push_back({{"index", i},
                     {"max_value", flat[worst]},
                     {"binding", labels[static_cast<std::size_t>(worst)]},
                     {"feasible", ok},
                     {"violated", violated}});
    text << "pose " << i << ": " << (ok ? "feasible" : "VIOLATED") << ", max constraint "
         << flat[worst] << " (" << labels[static_cast<std::size_t>(worst)] << ")";
    if (!violated.empty()) text << ", violated: " << violated.dump();
    text << '\n';
  }
  j["feasible"] = all_ok;
  j["constraints"] = std::move(poses);
  out << text.str();
  if (!a.out.empty()) {
    io::write_atomic(ctx.out_dir / "evaluation.json", j.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_simulate(const Args& a, std::ostream& out) {
  Context ctx = load(a);
  const io::RunConfig& cfg = ctx.cfg;
  if (!cfg.simulation) throw ConfigError(cfg.source.string() + ": /simulation: required field is missing");
  const io::SimulationSettings& s = *cfg.simulation;
  std::uint64_t seed = 0;
  if (a.seed) {
    seed = *a.seed;
  } else if (s.seed) {
    seed = *s.seed;
  } else {
    seed = require_seed(cfg);
  }
  const SimulationSpec spec{.model = cfg.model,
                            .mode = cfg.mode,
                            .mask = cfg.mask,
                            .truth = s.truth,
                            .law = s.law,
                            .plan = load_checked_plan(cfg, a.plan),
                            .test = cfg.test,
                            .sigma = cfg.sigma,
                            .n_trials = s.trials,
                            .seed = seed,
                            .generator = s.generator};

  const SimulationReport report = monte_carlo_validation(spec, ctx.exec);
  std::ostringstream summary;
  write_summary(summary, report);
  std::ostringstream meas;
  write_measurements_csv(meas,
                         simulate_measurements(spec.model, report.truth, spec.plan, spec.sigma,
                                               derive_seed(spec.seed, 0), spec.generator),
                         cfg.model.n_joints());
  io::write_atomic(ctx.out_dir / "simulation.json", io::simulation_json(cfg, spec, report));
  io::write_atomic(ctx.out_dir / "summary.txt", summary.str());
  io::write_atomic(ctx.out_dir / "measurements.csv", meas.str());
  out << summary.str();
  return kExitOk;
}

int cmd_compare(const Args& a, std::ostream& out) {
  Context ctx = load(a);
  const io::RunConfig& cfg = ctx.cfg;
  const std::uint64_t seed = require_seed(cfg);
  const DesignProblem problem = require_problem(cfg);
  std::vector<Factorization> facs = cfg.factorizations;
  if (facs.empty()) facs.push_back({cfg.m, 1});
  std::vector<Strategy> strategies = cfg.compare_strategies;
  if (strategies.empty()) strategies.push_back(cfg.strategy);
  const ComparisonTable table = compare_strategies(problem, facs, strategies, seed, cfg.options, ctx.exec);
  const std::string text = io::comparison_text(table);
  io::write_atomic(ctx.out_dir / "compare.csv", io::comparison_csv(table));
  io::write_atomic(ctx.out_dir / "compare.txt", text);
  io::write_atomic(ctx.out_dir / "compare.json", io::comparison_json(cfg, table));
  out << text;
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimal measurement-pose planning for robot calibration", "posecal"};
  app.require_subcommand(1);
  Args args;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "Output directory");
    sub->add_option("--seed", args.seed, "Master seed, overrides the config");
    sub->add_option("--threads", args.threads, "Worker threads (0 = default, 1 = serial)")
        ->check(CLI::NonNegativeNumber);
  };
  CLI::App* plan = app.add_subcommand("plan", "Optimize a measurement plan");
  add_common(plan);
  CLI::App* eval = app.add_subcommand("evaluate", "Accuracy and feasibility of a plan");
  add_common(eval);
  eval->add_option("--plan", args.plan, "Plan file (JSON)")->required();
  eval->add_option("--repeat", args.repeat, "Evaluate the plan repeated k times")->check(CLI::PositiveNumber);
  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo validation of a plan");
  add_common(sim);
  sim->add_option("--plan", args.plan, "Plan file (JSON)")->required();
  CLI::App* cmp = app.add_subcommand("compare", "Strategy and factorization comparison");
  add_common(cmp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*plan) return cmd_plan(args, out);
    if (*eval) return cmd_evaluate(args, out);
    if (*sim) return cmd_simulate(args, out);
    return cmd_compare(args, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidInput& e) {
    err << "error: invalid input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Unidentifiable& e) {
    err << "error: unidentifiable: " << e.what() << '\n';
    return kExitFailure;
  } catch (const InfeasibleProblem& e) {
    err << "error: infeasible: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace posecal
