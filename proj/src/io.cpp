#include "posecal/io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace posecal::io {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

// JSON value plus its location, for diagnostics of the form
// "file: /optimizer/genetic/population: expected an integer".
class Node {
 public:
  Node(const json& value, std::string file, std::string pointer = "")
      : v_(&value), file_(std::move(file)), ptr_(std::move(pointer)) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(file_ + ": " + (ptr_.empty() ? std::string("/") : ptr_) + ": " + msg);
  }

  const json& raw() const { return *v_; }
  bool is_object() const { return v_->is_object(); }
  bool is_string() const { return v_->is_string(); }
  bool is_number() const { return v_->is_number(); }
  bool is_null() const { return v_->is_null(); }

  void expect_object() const {
    if (!v_->is_object()) fail("expected an object");
  }

  // Rejects keys outside `allowed`.
  void only(std::initializer_list<std::string_view> allowed) const {
    expect_object();
    for (const auto& [key, _] : v_->items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        Node(*v_, file_, ptr_ + "/" + key).fail("unknown field");
      }
    }
  }

  bool has(const std::string& key) const {
    return v_->is_object() && v_->contains(key) && !(*v_)[key].is_null();
  }

  Node at(const std::string& key) const {
    expect_object();
    if (!has(key)) Node(*v_, file_, ptr_ + "/" + key).fail("required field is missing");
    return Node((*v_)[key], file_, ptr_ + "/" + key);
  }

  std::optional<Node> get(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return at(key);
  }

  std::vector<Node> array() const {
    if (!v_->is_array()) fail("expected an array");
    std::vector<Node> out;
    for (std::size_t i = 0; i < v_->size(); ++i) {
      out.emplace_back((*v_)[i], file_, ptr_ + "/" + std::to_string(i));
    }
    return out;
  }

  double number() const {
    if (!v_->is_number()) fail("expected a number");
    const double x = v_->get<double>();
    if (!std::isfinite(x)) fail("expected a finite number");
    return x;
  }

  std::uint64_t u64() const {
    if (!v_->is_number_integer() || (v_->is_number_integer() && !v_->is_number_unsigned() &&
                                     v_->get<std::int64_t>() < 0)) {
      fail("expected a non-negative integer");
    }
    return v_->get<std::uint64_t>();
  }

  std::size_t count(std::size_t min_value = 0) const {
    const std::uint64_t x = u64();
    if (x < min_value) fail("must be >= " + std::to_string(min_value));
    return static_cast<std::size_t>(x);
  }

  std::string str() const {
    if (!v_->is_string()) fail("expected a string");
    return v_->get<std::string>();
  }

  VecX vector(std::optional<std::size_t> size = std::nullopt) const {
    const auto items = array();
    if (size && items.size() != *size) {
      fail("expected " + std::to_string(*size) + " values, got " + std::to_string(items.size()));
    }
    VecX out(static_cast<Eigen::Index>(items.size()));
    for (std::size_t i = 0; i < items.size(); ++i) out[static_cast<Eigen::Index>(i)] = items[i].number();
    return out;
  }

  Vec3 vec3() const { return vector(3); }

  // Converts library exceptions raised while interpreting this node.
  template <class F>
  auto guard(F&& f) const {
    try {
      return f();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      fail(e.what());
    }
  }

 private:
  const json* v_;
  std::string file_;
  std::string ptr_;
};

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": malformed JSON: " + e.what());
  }
}

void check_schema(const Node& root) {
  const std::uint64_t v = root.at("schema_version").u64();
  if (v != static_cast<std::uint64_t>(kSchemaVersion)) {
    root.at("schema_version").fail("unsupported schema version " + std::to_string(v) +
                                   " (expected " + std::to_string(kSchemaVersion) + ")");
  }
}

RobotModel parse_robot(const Node& n) {
  n.only({"links", "joint_limits", "payload_limit", "tool"});
  std::vector<Link> links;
  for (const auto& ln : n.at("links").array()) {
    ln.only({"alpha_deg", "a", "d", "theta_deg", "length"});
    Link l;
    l.alpha = ln.get("alpha_deg") ? deg2rad(ln.at("alpha_deg").number()) : 0.0;
    l.a = ln.get("a") ? ln.at("a").number() : 0.0;
    l.d = ln.get("d") ? ln.at("d").number() : 0.0;
    l.theta = ln.get("theta_deg") ? deg2rad(ln.at("theta_deg").number()) : 0.0;
    const std::string axis = ln.get("length") ? ln.at("length").str() : "a";
    if (axis == "a") {
      l.length_axis = LengthAxis::A;
    } else if (axis == "d") {
      l.length_axis = LengthAxis::D;
    } else {
      ln.at("length").fail("expected \"a\" or \"d\"");
    }
    links.push_back(l);
  }
  std::vector<JointLimit> limits;
  for (const auto& jn : n.at("joint_limits").array()) {
    jn.only({"min_deg", "max_deg"});
    limits.push_back({deg2rad(jn.at("min_deg").number()), deg2rad(jn.at("max_deg").number())});
  }
  const double payload = n.at("payload_limit").number();
  const Vec3 tool = n.get("tool") ? n.at("tool").vec3() : Vec3::Zero();
  return n.guard([&] { return RobotModel(links, limits, payload, tool); });
}

MeasurementConfig parse_pose(const Node& n, std::size_t n_joints) {
  n.only({"q_deg", "force", "torque"});
  MeasurementConfig c;
  c.q = n.at("q_deg").vector(n_joints);
  for (Eigen::Index i = 0; i < c.q.size(); ++i) c.q[i] = deg2rad(c.q[i]);
  if (n.get("force") || n.get("torque")) {
    Vec6 w = Vec6::Zero();
    if (n.get("force")) w.head<3>() = n.at("force").vec3();
    if (n.get("torque")) w.tail<3>() = n.at("torque").vec3();
    c.wrench = w;
  }
  return c;
}

ConstraintSet parse_constraints(const std::optional<Node>& n, const RobotModel& model) {
  ConstraintSet cs = ConstraintSet::from_model(model);
  if (!n) return cs;
  n->only({"floor_z", "r_min", "box_min", "box_max", "phi_min_deg"});
  if (n->get("floor_z")) cs.floor_z = n->at("floor_z").number();
  if (n->get("r_min")) cs.min_collision_radius = n->at("r_min").number();
  if (n->get("box_min")) cs.box_min = n->at("box_min").vec3();
  if (n->get("box_max")) cs.box_max = n->at("box_max").vec3();
  if (n->get("phi_min_deg")) cs.min_tilt = deg2rad(n->at("phi_min_deg").number());
  n->guard([&] {
    cs.validate(model.n_joints());
    return 0;
  });
  return cs;
}

GeneticOptions parse_genetic(const Node& n) {
  n.only({"population", "generations", "tournament", "crossover_rate", "mutation_scale",
          "mutation_rate", "elites"});
  GeneticOptions g;
  if (n.get("population")) g.population = n.at("population").count(2);
  if (n.get("generations")) g.generations = n.at("generations").count();
  if (n.get("tournament")) g.tournament = n.at("tournament").count(1);
  if (n.get("crossover_rate")) g.crossover_rate = n.at("crossover_rate").number();
  if (n.get("mutation_scale")) g.mutation_scale = n.at("mutation_scale").number();
  if (n.get("mutation_rate")) g.mutation_rate = n.at("mutation_rate").number();
  if (n.get("elites")) g.elites = n.at("elites").count();
  if (g.crossover_rate < 0.0 || g.crossover_rate > 1.0) n.at("crossover_rate").fail("must lie in [0, 1]");
  if (g.mutation_rate < 0.0 || g.mutation_rate > 1.0) n.at("mutation_rate").fail("must lie in [0, 1]");
  if (g.mutation_scale < 0.0) n.at("mutation_scale").fail("must be >= 0");
  if (g.elites >= g.population) n.fail("elites must be smaller than population");
  return g;
}

GradientOptions parse_gradient(const Node& n) {
  n.only({"fd_step", "penalty_weight", "penalty_growth", "outer_loops", "max_inner_iterations",
          "step_tolerance"});
  GradientOptions g;
  if (n.get("fd_step")) g.fd_step = n.at("fd_step").number();
  if (n.get("penalty_weight")) g.penalty_weight = n.at("penalty_weight").number();
  if (n.get("penalty_growth")) g.penalty_growth = n.at("penalty_growth").number();
  if (n.get("outer_loops")) g.outer_loops = static_cast<int>(n.at("outer_loops").count(1));
  if (n.get("max_inner_iterations")) {
    g.max_inner_iterations = static_cast<int>(n.at("max_inner_iterations").count(1));
  }
  if (n.get("step_tolerance")) g.step_tolerance = n.at("step_tolerance").number();
  if (!(g.fd_step > 0.0)) n.at("fd_step").fail("must be > 0");
  if (!(g.penalty_weight > 0.0)) n.at("penalty_weight").fail("must be > 0");
  if (!(g.penalty_growth >= 1.0)) n.at("penalty_growth").fail("must be >= 1");
  if (!(g.step_tolerance > 0.0)) n.at("step_tolerance").fail("must be > 0");
  return g;
}

Lattice parse_lattice(const Node& n, const RobotModel& model, CalibrationMode mode) {
  n.only({"levels", "levels_deg"});
  if (n.get("levels") && n.get("levels_deg")) n.fail("give either levels or levels_deg, not both");
  if (n.get("levels")) {
    std::vector<std::pair<double, double>> bounds;
    for (const auto& lim : model.limits()) bounds.emplace_back(lim.lower, lim.upper);
    if (needs_wrench(mode)) {
      bounds.emplace_back(0.0, kPi);
      bounds.emplace_back(-kPi, kPi);
    }
    return Lattice::uniform(bounds, static_cast<int>(n.at("levels").count(1)));
  }
  Lattice lat;
  for (const auto& var : n.at("levels_deg").array()) {
    VecX v = var.vector();
    std::vector<double> levels;
    for (Eigen::Index i = 0; i < v.size(); ++i) levels.push_back(deg2rad(v[i]));
    lat.levels.push_back(std::move(levels));
  }
  return lat;
}

Factorization parse_factorization(const Node& n) {
  const std::string s = n.str();
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument("no x");
    std::size_t used = 0;
    const auto m0 = std::stoul(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument("trailing");
    const auto k = std::stoul(s.substr(x + 1), &used);
    if (used != s.size() - x - 1) throw std::invalid_argument("trailing");
    if (m0 < 1 || k < 1) throw std::invalid_argument("zero");
    return {m0, k};
  } catch (const std::exception&) {
    n.fail("expected a factorization like \"6x2\" (m0 x k, both >= 1)");
  }
}

void parse_optimizer(const Node& n, RunConfig& cfg) {
  n.only({"strategy", "m", "seed", "random_samples", "n_starts", "genetic_runs", "hybrid_runs",
          "genetic", "gradient", "lattice", "factorizations", "compare_strategies"});
  if (n.get("strategy")) cfg.strategy = n.at("strategy").guard([&] { return parse_strategy(n.at("strategy").str()); });
  if (n.get("m")) cfg.m = n.at("m").count(1);
  if (n.get("seed")) cfg.seed = n.at("seed").u64();
  if (n.get("random_samples")) cfg.options.random_samples = n.at("random_samples").count(1);
  if (n.get("n_starts")) cfg.options.n_starts = n.at("n_starts").count(1);
  if (n.get("genetic_runs")) cfg.options.genetic_runs = n.at("genetic_runs").count(1);
  if (n.get("hybrid_runs")) cfg.options.hybrid_runs = n.at("hybrid_runs").count(1);
  if (n.get("genetic")) cfg.options.genetic = parse_genetic(n.at("genetic"));
  if (n.get("gradient")) cfg.options.gradient = parse_gradient(n.at("gradient"));
  if (n.get("lattice")) cfg.lattice = parse_lattice(n.at("lattice"), cfg.model, cfg.mode);
  if (n.get("factorizations")) {
    for (const auto& f : n.at("factorizations").array()) cfg.factorizations.push_back(parse_factorization(f));
  }
  if (n.get("compare_strategies")) {
    for (const auto& s : n.at("compare_strategies").array()) {
      cfg.compare_strategies.push_back(s.guard([&] { return parse_strategy(s.str()); }));
    }
  }
}

ParamVector parse_truth(const Node& n, std::size_t n_joints) {
  n.only({"dl", "dq_deg", "k"});
  ParamVector t(n_joints);
  const VecX dl = n.get("dl") ? n.at("dl").vector(n_joints) : VecX::Zero(static_cast<Eigen::Index>(n_joints));
  const VecX dq = n.get("dq_deg") ? n.at("dq_deg").vector(n_joints) : VecX::Zero(static_cast<Eigen::Index>(n_joints));
  const VecX k = n.get("k") ? n.at("k").vector(n_joints) : VecX::Zero(static_cast<Eigen::Index>(n_joints));
  for (std::size_t i = 0; i < n_joints; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    t.dl(i) = dl[ii];
    t.dq(i) = deg2rad(dq[ii]);
    t.k(i) = k[ii];
  }
  return t;
}

SimulationSettings parse_simulation(const Node& n, std::size_t n_joints) {
  n.only({"trials", "seed", "generator", "truth", "truth_law"});
  SimulationSettings s;
  if (n.get("trials")) s.trials = n.at("trials").count(1);
  if (n.get("seed")) s.seed = n.at("seed").u64();
  if (n.get("generator")) {
    s.generator = n.at("generator").guard([&] { return parse_generator(n.at("generator").str()); });
  }
  if (n.get("truth")) s.truth = parse_truth(n.at("truth"), n_joints);
  if (n.get("truth_law")) {
    const Node l = n.at("truth_law");
    l.only({"dl_range", "dq_range_deg", "k_min", "k_max"});
    if (l.get("dl_range")) s.law.dl_range = l.at("dl_range").number();
    if (l.get("dq_range_deg")) s.law.dq_range = deg2rad(l.at("dq_range_deg").number());
    if (l.get("k_min")) s.law.k_min = l.at("k_min").number();
    if (l.get("k_max")) s.law.k_max = l.at("k_max").number();
    if (s.law.dl_range < 0.0 || s.law.dq_range < 0.0 || s.law.k_min < 0.0 || s.law.k_max < s.law.k_min) {
      l.fail("ranges must be non-negative with k_min <= k_max");
    }
  }
  return s;
}

ojson vec_json(const VecX& v, double scale = 1.0) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i] * scale);
  return a;
}

ojson deg_json(const VecX& v) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(rad2deg(v[i]));
  return a;
}

ojson mat_json(const MatX& m) {
  ojson rows = ojson::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

ojson pose_json(const MeasurementConfig& c) {
  ojson p;
  p["q_deg"] = deg_json(c.q);
  if (c.wrench) {
    p["force"] = vec_json(c.wrench->head<3>());
    p["torque"] = vec_json(c.wrench->tail<3>());
  }
  return p;
}

ojson summary_json(const Summary& s) {
  return ojson{{"min", s.min}, {"mean", s.mean}, {"max", s.max}, {"count", s.count},
               {"unidentifiable", s.unidentifiable}};
}

ojson options_json(const OptimizerOptions& o) {
  ojson j;
  j["random_samples"] = o.random_samples;
  j["n_starts"] = o.n_starts;
  j["genetic_runs"] = o.genetic_runs;
  j["hybrid_runs"] = o.hybrid_runs;
  j["genetic"] = ojson{{"population", o.genetic.population},
                       {"generations", o.genetic.generations},
                       {"tournament", o.genetic.tournament},
                       {"crossover_rate", o.genetic.crossover_rate},
                       {"mutation_scale", o.genetic.mutation_scale},
                       {"mutation_rate", o.genetic.mutation_rate},
                       {"elites", o.genetic.elites}};
  j["gradient"] = ojson{{"fd_step", o.gradient.fd_step},
                        {"penalty_weight", o.gradient.penalty_weight},
                        {"penalty_growth", o.gradient.penalty_growth},
                        {"outer_loops", o.gradient.outer_loops},
                        {"max_inner_iterations", o.gradient.max_inner_iterations},
                        {"step_tolerance", o.gradient.step_tolerance}};
  return j;
}

ojson header(const char* kind, const RunConfig& cfg) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kind;
  j["mode"] = std::string(to_string(cfg.mode));
  j["mask"] = cfg.mask.names();
  j["sigma"] = cfg.sigma;
  return j;
}

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

std::string fmt(double x, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << x;
  return os.str();
}

}  // namespace

DesignProblem RunConfig::problem() const {
  return DesignProblem{model, mode, mask, test, sigma, constraints, m, lattice};
}

RunConfig parse_config(const std::string& text, const fs::path& source) {
  const std::string file = source.string();
  const json doc = parse_json(text, file);
  const Node root(doc, file);
  root.only({"schema_version", "robot", "mode", "mask", "sigma", "test_poses", "constraints",
             "optimizer", "simulation", "output_dir"});
  check_schema(root);

  RunConfig cfg;
  cfg.source = source;
  const Node robot = root.at("robot");
  if (robot.is_string()) {
    const fs::path rpath = source.parent_path() / robot.str();
    std::string rtext;
    try {
      rtext = read_file(rpath);
    } catch (const Error& e) {
      robot.fail(e.what());
    }
    const json rdoc = parse_json(rtext, rpath.string());
    cfg.model = parse_robot(Node(rdoc, rpath.string()));
  } else {
    cfg.model = parse_robot(robot);
  }
  const std::size_t n = cfg.model.n_joints();

  if (root.get("mode")) cfg.mode = root.at("mode").guard([&] { return parse_mode(root.at("mode").str()); });
  if (root.get("mask")) {
    std::vector<std::string> names;
    for (const auto& nm : root.at("mask").array()) names.push_back(nm.str());
    cfg.mask = root.at("mask").guard([&] { return ParamMask::from_names(n, names); });
  } else {
    cfg.mask = ParamMask::for_mode(n, cfg.mode);
  }
  if (root.get("sigma")) {
    cfg.sigma = root.at("sigma").number();
    if (cfg.sigma < 0.0) root.at("sigma").fail("must be >= 0");
  }
  for (const auto& p : root.at("test_poses").array()) {
    MeasurementConfig c = parse_pose(p, n);
    if (needs_wrench(cfg.mode) && !c.wrench) p.fail("test pose needs a force in " + std::string(to_string(cfg.mode)) + " mode");
    if (!needs_wrench(cfg.mode)) c.wrench.reset();
    cfg.test.poses.push_back(std::move(c));
  }
  if (cfg.test.poses.empty()) root.at("test_poses").fail("at least one test pose is required");
  cfg.constraints = parse_constraints(root.get("constraints"), cfg.model);
  if (root.get("optimizer")) parse_optimizer(root.at("optimizer"), cfg);
  if (root.get("simulation")) cfg.simulation = parse_simulation(root.at("simulation"), n);
  if (root.get("output_dir")) cfg.output_dir = root.at("output_dir").str();
  return cfg;
}

RunConfig load_config(const fs::path& path) { return parse_config(read_file(path), path); }

ExperimentPlan parse_plan(const std::string& text, const std::string& source, const RobotModel& model) {
  const json doc = parse_json(text, source);
  const Node root(doc, source);
  root.expect_object();
  check_schema(root);
  ExperimentPlan plan;
  plan.mode = root.at("mode").guard([&] { return parse_mode(root.at("mode").str()); });
  for (const auto& p : root.at("poses").array()) {
    MeasurementConfig c = parse_pose(p, model.n_joints());
    if (needs_wrench(plan.mode) && !c.wrench) p.fail("pose needs a force in " + std::string(to_string(plan.mode)) + " mode");
    if (!needs_wrench(plan.mode)) c.wrench.reset();
    plan.configs.push_back(std::move(c));
  }
  if (plan.configs.empty()) root.at("poses").fail("plan has no poses");
  return plan;
}

ExperimentPlan load_plan(const fs::path& path, const RobotModel& model) {
  return parse_plan(read_file(path), path.string(), model);
}

std::string plan_json(const RunConfig& cfg, const DesignReport& r) {
  ojson j = header("plan", cfg);
  j["strategy"] = std::string(to_string(r.strategy));
  j["seed"] = r.seed;
  j["m"] = r.best_plan.size();
  j["m0"] = r.m0 ? r.m0 : r.best_plan.size();
  j["k"] = r.k;
  j["rho0"] = r.rho0_best;
  if (r.k > 1) j["rho0_sub"] = r.rho0_sub;
  const DesignProblem problem = cfg.problem().with_size(r.best_plan.size());
  ojson poses = ojson::array();
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : r.best_plan.configs) {
    poses.push_back(pose_json(c));
    worst = std::max(worst, evaluate(problem.model, c, problem.constraints, problem.mode).max());
  }
  j["poses"] = std::move(poses);
  j["constraints"] = ojson{{"max_value", worst}, {"feasible", worst <= kFeasibilityTol}};
  j["summary"] = summary_json(r.summary);
  ojson runs = ojson::array();
  for (const auto& run : r.runs) {
    runs.push_back(ojson{{"index", run.index},
                         {"seed", run.seed},
                         {"start_rho0", run.start_rho0},
                         {"final_rho0", run.final_rho0},
                         {"iterations", run.iterations},
                         {"evaluations", run.evaluations},
                         {"parent", run.parent}});
  }
  j["runs"] = std::move(runs);
  j["evaluations"] = r.evaluations;
  j["options"] = options_json(r.options);
  return dump(j);
}

std::string simulation_json(const RunConfig& cfg, const SimulationSpec& spec, const SimulationReport& r) {
  ojson j = header("simulation", cfg);
  j["trials"] = r.n_trials;
  j["seed"] = r.seed;
  j["generator"] = std::string(to_string(spec.generator));
  j["m"] = spec.plan.size();
  const std::size_t n = spec.model.n_joints();
  j["truth"] = ojson{{"dl", vec_json(r.truth.values().head(static_cast<Eigen::Index>(n)))},
                     {"dq_deg", deg_json(r.truth.values().segment(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)))},
                     {"k", vec_json(r.truth.values().tail(static_cast<Eigen::Index>(n)))}};
  j["predicted_rho0"] = r.predicted_rho0;
  j["empirical_rho0"] = r.empirical_rho0;
  j["ratio"] = r.ratio;
  j["covariance_max_rel_error"] = r.covariance_max_rel_error;
  j["estimate_bias_max_z"] = r.estimate_bias_max_z;
  j["dp_mean_max_z"] = r.dp_mean_max_z;
  ojson dpm = ojson::array();
  for (const auto& v : r.dp_mean) dpm.push_back(vec_json(v));
  j["dp_mean"] = std::move(dpm);
  j["mean_estimate"] = vec_json(r.mean_estimate);
  j["error_covariance"] = mat_json(r.error_covariance);
  j["predicted_covariance"] = mat_json(r.predicted_covariance);
  return dump(j);
}

std::string comparison_json(const RunConfig& cfg, const ComparisonTable& t) {
  ojson j = header("comparison", cfg);
  j["m"] = t.m;
  j["seed"] = t.seed;
  ojson rows = ojson::array();
  for (const auto& row : t.rows) {
    rows.push_back(ojson{{"strategy", std::string(to_string(row.strategy))},
                         {"m0", row.m0},
                         {"k", row.k},
                         {"rho0", row.rho0},
                         {"rho0_sub", row.rho0_sub},
                         {"sqrt_k_residual", row.sqrt_k_residual},
                         {"ratio_vs_direct", row.ratio_vs_direct},
                         {"summary", summary_json(row.summary)},
                         {"evaluations", row.evaluations}});
  }
  j["rows"] = std::move(rows);
  return dump(j);
}

std::string trace_csv(std::span<const TracePoint> trace) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "evaluations,elapsed_s,best_rho0\n";
  for (const auto& p : trace) os << p.evaluations << ',' << p.elapsed_s << ',' << p.best_rho0 << '\n';
  return os.str();
}

std::string comparison_csv(const ComparisonTable& t) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "strategy,m0,k,rho0,rho0_sub,sqrt_k_residual,ratio_vs_direct,rho0_min,rho0_mean,rho0_max,"
        "runs,unidentifiable,evaluations,wall_s\n";
  for (const auto& r : t.rows) {
    os << to_string(r.strategy) << ',' << r.m0 << ',' << r.k << ',' << r.rho0 << ',' << r.rho0_sub << ','
       << r.sqrt_k_residual << ',' << r.ratio_vs_direct << ',' << r.summary.min << ',' << r.summary.mean
       << ',' << r.summary.max << ',' << r.summary.count << ',' << r.summary.unidentifiable << ','
       << r.evaluations << ',' << r.wall_s << '\n';
  }
  return os.str();
}

std::string comparison_text(const ComparisonTable& t) {
  std::ostringstream os;
  os << "Strategy comparison, m = " << t.m << ", seed " << t.seed << "\n\n";
  os << std::left << std::setw(10) << "strategy" << std::setw(8) << "m0xk" << std::right << std::setw(12)
     << "rho0 [mm]" << std::setw(12) << "min" << std::setw(12) << "mean" << std::setw(12) << "max"
     << std::setw(10) << "vs k=1" << std::setw(12) << "sqrt(k) law" << std::setw(10) << "wall [s]" << '\n';
  for (const auto& r : t.rows) {
    const std::string f = std::to_string(r.m0) + "x" + std::to_string(r.k);
    os << std::left << std::setw(10) << to_string(r.strategy) << std::setw(8) << f << std::right
       << std::setw(12) << fmt(r.rho0) << std::setw(12) << fmt(r.summary.min) << std::setw(12)
       << fmt(r.summary.mean) << std::setw(12) << fmt(r.summary.max) << std::setw(10)
       << fmt(r.ratio_vs_direct, 4) << std::setw(12) << (r.sqrt_k_residual <= 1e-12 ? "ok" : fmt(r.sqrt_k_residual, 2))
       << std::setw(10) << fmt(r.wall_s, 3) << '\n';
  }
  os << "\nmin/mean/max: per-run finals of the repeated plan. vs k=1: rho0 over the\n"
        "unfactorized row of the same strategy. sqrt(k) law: |rho0*sqrt(k)/rho0_sub - 1|.\n";
  return os.str();
}

void write_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << contents;
    out.flush();
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open file '" + path.string() + "' (file not found or unreadable)");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace posecal::io
