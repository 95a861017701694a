#include "config_file.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace funnel::tools {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>> kKeys = {
    {"problem", {"model", "nodes", "final_time", "mode"}},
    {"boundary", {"initial_state", "initial_radii", "final_state", "final_radii"}},
    {"inputs", {"lower", "upper"}},
    {"cost", {"state_weights", "input_weights"}},
    {"weights", {"virtual_control", "trust_region", "funnel_trust_region"}},
    {"funnel",
     {"alpha", "lambda_w_grid", "initial_diameters", "lqr_state_weight", "lqr_input_weight"}},
    {"lipschitz", {"samples", "safety_factor", "seed", "method"}},
    {"discretization", {"method", "substeps"}},
    {"stopping", {"trajectory_tol", "funnel_tol", "max_iterations"}},
    {"solver", {"max_iterations", "feasibility_tol", "absolute_gap_tol", "relative_gap_tol"}},
    {"verification", {"samples", "seed", "disturbance"}},
};
const std::set<std::string> kObstacleKeys = {"center", "diameters", "coordinates"};

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw ConfigError(field + ": " + what);
}

bool is_obstacle_section(const std::string& name, int& index) {
  if (name.rfind("obstacle", 0) != 0 || name.size() == 8) return false;
  const char* first = name.data() + 8;
  const char* last = name.data() + name.size();
  auto [ptr, ec] = std::from_chars(first, last, index);
  return ec == std::errc() && ptr == last && index >= 1;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  bool has(const std::string& field) const {
    return static_cast<bool>(tree_.get_optional<std::string>(pt::ptree::path_type(field, '.')));
  }

  std::string text(const std::string& field) const {
    auto v = tree_.get_optional<std::string>(pt::ptree::path_type(field, '.'));
    if (!v) bad(field, "missing");
    return *v;
  }

  std::string text_or(const std::string& field, const std::string& fallback) const {
    return has(field) ? text(field) : fallback;
  }

  static double to_double(const std::string& field, const std::string& token) {
    double v = 0.0;
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), last, v);
    if (ec != std::errc() || ptr != last) bad(field, "expected a number, got '" + token + "'");
    return v;
  }

  template <typename Int>
  static Int to_int(const std::string& field, const std::string& token) {
    Int v = 0;
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), last, v);
    if (ec != std::errc() || ptr != last) bad(field, "expected an integer, got '" + token + "'");
    return v;
  }

  static std::vector<std::string> tokens(const std::string& value) {
    std::string s = value;
    for (char& c : s)
      if (c == ',') c = ' ';
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string t; in >> t;) out.push_back(t);
    return out;
  }

  double number(const std::string& field) const {
    const auto t = tokens(text(field));
    if (t.size() != 1) bad(field, "expected a single number");
    return to_double(field, t[0]);
  }

  template <typename Int>
  Int integer(const std::string& field) const {
    const auto t = tokens(text(field));
    if (t.size() != 1) bad(field, "expected a single integer");
    return to_int<Int>(field, t[0]);
  }

  Vector vector(const std::string& field) const {
    const auto t = tokens(text(field));
    if (t.empty()) bad(field, "expected at least one number");
    Vector v(static_cast<Eigen::Index>(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i) v(static_cast<Eigen::Index>(i)) = to_double(field, t[i]);
    return v;
  }

  void number_into(const std::string& field, double& out) const {
    if (has(field)) out = number(field);
  }
  template <typename Int>
  void integer_into(const std::string& field, Int& out) const {
    if (has(field)) out = integer<Int>(field);
  }

 private:
  const pt::ptree& tree_;
};

void check_keys(const pt::ptree& tree) {
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      bad(section, "keys must appear inside a [section]");
    }
    int index = 0;
    const std::set<std::string>* allowed = nullptr;
    if (is_obstacle_section(section, index)) {
      allowed = &kObstacleKeys;
    } else if (auto it = kKeys.find(section); it != kKeys.end()) {
      allowed = &it->second;
    } else {
      bad(section, "unknown section");
    }
    for (const auto& [key, value] : body) {
      if (!allowed->count(key)) bad(section + "." + key, "unknown key");
    }
  }
}

Matrix diag_squared(const Vector& radii) { return Vector(radii.array().square()).asDiagonal(); }

}  // namespace

ConfigFile parse_config(const std::string& text, const std::string& source) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  check_keys(tree);
  const Reader r(tree);

  ConfigFile cfg;
  RunConfig& c = cfg.run;
  c.model = r.text("problem.model");
  ModelPtr model;
  try {
    model = make_model(c.model);
  } catch (const Error& e) {
    bad("problem.model", e.what());
  }
  const int nx = model->state_dim(), nu = model->input_dim();

  c.intervals = r.integer<int>("problem.nodes");
  c.final_time = r.number("problem.final_time");
  if (r.has("problem.mode")) {
    try {
      c.mode = parse_run_mode(r.text("problem.mode"));
    } catch (const Error& e) {
      bad("problem.mode", e.what());
    }
  }

  c.x_initial = r.vector("boundary.initial_state");
  c.x_final = r.vector("boundary.final_state");
  const Vector r_initial = r.vector("boundary.initial_radii");
  c.Q_initial = diag_squared(r_initial);
  c.Q_final = diag_squared(r.vector("boundary.final_radii"));

  std::map<int, std::string> obstacle_sections;
  for (const auto& [section, body] : tree) {
    int index = 0;
    if (is_obstacle_section(section, index)) obstacle_sections[index] = section;
  }
  int expected = 1;
  for (const auto& [index, section] : obstacle_sections) {
    if (index != expected) bad(section, "obstacle sections must be numbered 1, 2, ... without gaps");
    ++expected;
    EllipseObstacle o;
    o.center = r.vector(section + ".center");
    o.diameters = r.vector(section + ".diameters");
    if (r.has(section + ".coordinates")) {
      const auto t = Reader::tokens(r.text(section + ".coordinates"));
      if (t.size() != 2) bad(section + ".coordinates", "expected two state indices");
      o.coord_x = Reader::to_int<int>(section + ".coordinates", t[0]);
      o.coord_y = Reader::to_int<int>(section + ".coordinates", t[1]);
    }
    c.obstacles.push_back(o);
  }

  c.input_lower = r.vector("inputs.lower");
  c.input_upper = r.vector("inputs.upper");

  c.state_cost = r.has("cost.state_weights") ? Matrix(r.vector("cost.state_weights").asDiagonal())
                                             : Matrix::Zero(nx, nx);
  c.input_cost = r.has("cost.input_weights") ? Matrix(r.vector("cost.input_weights").asDiagonal())
                                             : Matrix::Identity(nu, nu);

  r.number_into("weights.virtual_control", c.virtual_control_weight);
  r.number_into("weights.trust_region", c.trust_region_weight);
  r.number_into("weights.funnel_trust_region", c.funnel_trust_weight);

  r.number_into("funnel.alpha", c.alpha);
  if (r.has("funnel.lambda_w_grid")) {
    const Vector g = r.vector("funnel.lambda_w_grid");
    c.lambda_w_fractions.assign(g.data(), g.data() + g.size());
  }
  c.initial_diameters =
      r.has("funnel.initial_diameters") ? r.vector("funnel.initial_diameters") : Vector(2.0 * r_initial);
  r.number_into("funnel.lqr_state_weight", c.lqr_state_weight);
  r.number_into("funnel.lqr_input_weight", c.lqr_input_weight);

  r.integer_into("lipschitz.samples", c.lipschitz.samples);
  r.number_into("lipschitz.safety_factor", c.lipschitz.safety_factor);
  r.integer_into("lipschitz.seed", c.lipschitz.seed);
  const std::string lm = r.text_or("lipschitz.method", "indirect");
  if (lm == "indirect") {
    c.lipschitz.method = LipschitzMethod::kIndirect;
  } else if (lm == "direct") {
    c.lipschitz.method = LipschitzMethod::kDirect;
  } else {
    bad("lipschitz.method", "expected indirect or direct, got '" + lm + "'");
  }

  const std::string dm = r.text_or("discretization.method", "rk4-zoh");
  if (dm == "rk4-zoh") {
    c.discretization.method = DiscretizationMethod::kRk4Zoh;
  } else if (dm == "euler") {
    c.discretization.method = DiscretizationMethod::kEuler;
  } else {
    bad("discretization.method", "expected rk4-zoh or euler, got '" + dm + "'");
  }
  r.integer_into("discretization.substeps", c.discretization.substeps);

  r.number_into("stopping.trajectory_tol", c.trajectory_tol);
  r.number_into("stopping.funnel_tol", c.funnel_tol);
  r.integer_into("stopping.max_iterations", c.max_iterations);

  r.integer_into("solver.max_iterations", c.solver.max_iterations);
  r.number_into("solver.feasibility_tol", c.solver.feasibility_tol);
  r.number_into("solver.absolute_gap_tol", c.solver.absolute_gap_tol);
  r.number_into("solver.relative_gap_tol", c.solver.relative_gap_tol);

  r.integer_into("verification.samples", cfg.verify.samples);
  r.integer_into("verification.seed", cfg.verify.seed);
  const std::string vd = r.text_or("verification.disturbance", "random");
  if (vd == "random") {
    cfg.verify.disturbance = DisturbanceMode::kRandomSphere;
  } else if (vd == "worst-case") {
    cfg.verify.disturbance = DisturbanceMode::kWorstCase;
  } else {
    bad("verification.disturbance", "expected random or worst-case, got '" + vd + "'");
  }
  if (cfg.verify.samples < 1) bad("verification.samples", "must be at least 1");
  if (c.solver.max_iterations < 1) bad("solver.max_iterations", "must be at least 1");

  try {
    c.validate(nx, nu);
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

ConfigFile load_config(const std::string& path) { return parse_config(read_text_file(path), path); }

}  // namespace funnel::tools
