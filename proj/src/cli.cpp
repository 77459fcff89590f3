#include "bundle_newton/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "bundle_newton/problems.hpp"

namespace bundle_newton::cli {

namespace {

using geometry::Vec3;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double value = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (t.empty() || ec != std::errc() || ptr != last) {
    throw ConfigError("invalid number for '" + key + "': '" + text + "'");
  }
  return value;
}

long long parse_integer(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError("invalid integer for '" + key + "': '" + text + "'");
  }
  return value;
}

int parse_int(const std::string& key, const std::string& text) {
  const long long v = parse_integer(key, text);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError("integer out of range for '" + key + "'");
  }
  return static_cast<int>(v);
}

Vec3 parse_vec3(const std::string& key, const std::string& text) {
  Vec3 out;
  std::stringstream ss(text);
  std::string part;
  int i = 0;
  while (std::getline(ss, part, ',')) {
    if (i == 3) {
      throw ConfigError("'" + key + "' needs exactly three comma-separated numbers");
    }
    out[i++] = parse_double(key, part);
  }
  if (i != 3) {
    throw ConfigError("'" + key + "' needs exactly three comma-separated numbers");
  }
  return out;
}

std::string format_vec3(const Vec3& v) {
  return format_double(v[0]) + "," + format_double(v[1]) + "," + format_double(v[2]);
}

geometry::UnitVec3 unit_or_config_error(const std::string& key, const Vec3& v) {
  if (!v.allFinite() || std::abs(v.norm() - 1.0) > geometry::UnitVec3::kNormTolerance) {
    throw ConfigError("'" + key + "' must be a unit vector");
  }
  return geometry::UnitVec3(v);
}

int exit_code_for(newton::Termination t) {
  switch (t) {
    case newton::Termination::Converged: return kExitConverged;
    case newton::Termination::DampingFailed: return kExitDampingFailed;
    case newton::Termination::MaxIterations: return kExitMaxIterations;
  }
  return kExitFailure;
}

struct IterateWriter {
  std::ofstream out;
  int counter = 0;

  explicit IterateWriter(const std::filesystem::path& path) : out(path) {
    if (!out) {
      throw ConfigError("cannot write " + path.string());
    }
    out << "outer_iter,norm_dx_inf,accepted_alpha,inner_trials,theta_final,residual_inf\n";
  }

  void write(const newton::NewtonTrace& trace) {
    for (const auto& it : trace.iterations) {
      out << ++counter << ',' << format_double(it.norm_dx) << ',' << format_double(it.accepted_alpha)
          << ',' << it.inner_count << ',' << format_double(it.theta_final()) << ','
          << format_double(it.residual_inf) << '\n';
    }
  }
};

void write_curve_csv(const std::filesystem::path& path, const fem1d::NodalCurve& curve) {
  std::ofstream out(path);
  out << "t,x,y,z\n";
  for (int i = 0; i < curve.grid.n_nodes(); ++i) {
    out << format_double(curve.grid.node(i)) << ',' << format_vec3(curve[i].coords()) << '\n';
  }
}

void write_rod_csv(const std::filesystem::path& path, const problems::RodState& rod) {
  std::ofstream out(path);
  out << "t,x,y,z,vx,vy,vz,lx,ly,lz\n";
  const int nodes = rod.grid.n_nodes();
  for (int i = 0; i < nodes; ++i) {
    const auto n = static_cast<std::size_t>(i);
    // Multiplier of the interval to the right of node i; the last node repeats it.
    const auto e = static_cast<std::size_t>(std::min(i, rod.grid.n_intervals() - 1));
    out << format_double(rod.grid.node(i)) << ',' << format_vec3(rod.y[n]) << ','
        << format_vec3(rod.v[n].coords()) << ',' << format_vec3(rod.lambda[e]) << '\n';
  }
}

void write_meta(const std::filesystem::path& path, const RunConfig& cfg, const KeyValues& results) {
  std::ofstream out(path);
  out << to_key_values(cfg);
  for (const auto& [k, v] : results) {
    out << "result." << k << '=' << v << '\n';
  }
}

void add_trace_results(KeyValues& results, const newton::NewtonTrace& trace) {
  results["status"] = newton::to_string(trace.terminated);
  results["message"] = trace.message;
  results["outer_iterations"] = std::to_string(trace.iterations.size());
  if (!trace.iterations.empty()) {
    results["final_norm_dx"] = format_double(trace.iterations.back().norm_dx);
  }
}

}  // namespace

const char* to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::GeodesicForce: return "geodesic-force";
    case ProblemKind::Obstacle: return "obstacle";
    case ProblemKind::Rod: return "rod";
  }
  return "unknown";
}

ProblemKind parse_problem(const std::string& name) {
  if (name == "geodesic-force") return ProblemKind::GeodesicForce;
  if (name == "obstacle") return ProblemKind::Obstacle;
  if (name == "rod") return ProblemKind::Rod;
  throw ConfigError("unknown problem '" + name + "' (expected geodesic-force, obstacle or rod)");
}

std::string format_double(double x) {
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "problem",   "n",         "t-end",    "tol",         "theta-des",  "theta-acc", "alpha0",
      "alpha-fail", "max-outer", "max-inner", "force-scale", "h-ref",      "p0",        "p-growth",
      "violation-tol", "max-stages", "sigma", "gamma0",     "gamma-t",    "rod-ya",    "rod-yb",
      "rod-va",    "rod-vb",    "out-dir",  "seed"};
  return keys;
}

RunConfig RunConfig::resolved() const {
  RunConfig out = *this;
  switch (problem) {
    case ProblemKind::GeodesicForce: {
      const auto d = problems::default_geodesic_boundary();
      if (!out.gamma0) out.gamma0 = d.gamma0.coords();
      if (!out.gamma_t) out.gamma_t = d.gamma_t.coords();
      break;
    }
    case ProblemKind::Obstacle: {
      const auto d = problems::default_obstacle_boundary();
      if (!out.gamma0) out.gamma0 = d.gamma0.coords();
      if (!out.gamma_t) out.gamma_t = d.gamma_t.coords();
      break;
    }
    case ProblemKind::Rod: {
      const auto d = problems::default_rod_boundary();
      if (!out.rod_ya) out.rod_ya = d.y_a;
      if (!out.rod_yb) out.rod_yb = d.y_b;
      if (!out.rod_va) out.rod_va = d.v_a.coords();
      if (!out.rod_vb) out.rod_vb = d.v_b.coords();
      break;
    }
  }
  return out;
}

void RunConfig::validate() const {
  if (n < 1) throw ConfigError("n must be at least 1");
  if (!(t_end > 0.0)) throw ConfigError("t-end must be positive");
  try {
    newton.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (problem == ProblemKind::Obstacle) {
    if (!(h_ref > 0.0 && h_ref < 1.0)) throw ConfigError("h-ref must lie in (0,1)");
    if (!(p0 > 0.0)) throw ConfigError("p0 must be positive");
    if (!(p_growth > 1.0)) throw ConfigError("p-growth must exceed 1");
    if (!(violation_tol > 0.0)) throw ConfigError("violation-tol must be positive");
    if (max_stages < 1) throw ConfigError("max-stages must be positive");
  }
  if (problem == ProblemKind::Rod && !(sigma > 0.0)) throw ConfigError("sigma must be positive");
  for (const auto& [key, v] : {std::pair{"gamma0", gamma0}, std::pair{"gamma-t", gamma_t},
                               std::pair{"rod-va", rod_va}, std::pair{"rod-vb", rod_vb}}) {
    if (v) unit_or_config_error(key, *v);
  }
}

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_value_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file " + path.string());
  }
  return parse_key_values(in);
}

RunConfig config_from_key_values(const KeyValues& kv) {
  RunConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key.rfind("result.", 0) == 0) continue;
    if (key == "problem") cfg.problem = parse_problem(value);
    else if (key == "n") cfg.n = parse_int(key, value);
    else if (key == "t-end") cfg.t_end = parse_double(key, value);
    else if (key == "tol") cfg.newton.tol = parse_double(key, value);
    else if (key == "theta-des") cfg.newton.theta_des = parse_double(key, value);
    else if (key == "theta-acc") cfg.newton.theta_acc = parse_double(key, value);
    else if (key == "alpha0") cfg.newton.alpha0 = parse_double(key, value);
    else if (key == "alpha-fail") cfg.newton.alpha_fail = parse_double(key, value);
    else if (key == "max-outer") cfg.newton.max_outer = parse_int(key, value);
    else if (key == "max-inner") cfg.newton.max_inner = parse_int(key, value);
    else if (key == "force-scale") cfg.force_scale = parse_double(key, value);
    else if (key == "h-ref") cfg.h_ref = parse_double(key, value);
    else if (key == "p0") cfg.p0 = parse_double(key, value);
    else if (key == "p-growth") cfg.p_growth = parse_double(key, value);
    else if (key == "violation-tol") cfg.violation_tol = parse_double(key, value);
    else if (key == "max-stages") cfg.max_stages = parse_int(key, value);
    else if (key == "sigma") cfg.sigma = parse_double(key, value);
    else if (key == "gamma0") cfg.gamma0 = parse_vec3(key, value);
    else if (key == "gamma-t") cfg.gamma_t = parse_vec3(key, value);
    else if (key == "rod-ya") cfg.rod_ya = parse_vec3(key, value);
    else if (key == "rod-yb") cfg.rod_yb = parse_vec3(key, value);
    else if (key == "rod-va") cfg.rod_va = parse_vec3(key, value);
    else if (key == "rod-vb") cfg.rod_vb = parse_vec3(key, value);
    else if (key == "out-dir") cfg.out_dir = value;
    else if (key == "seed") {
      const long long s = parse_integer(key, value);
      if (s < 0) throw ConfigError("seed must be non-negative");
      cfg.seed = static_cast<std::uint64_t>(s);
    } else {
      throw ConfigError("unknown configuration key '" + key + "'");
    }
  }
  return cfg;
}

std::string to_key_values(const RunConfig& cfg) {
  std::ostringstream out;
  out << "problem=" << to_string(cfg.problem) << '\n'
      << "n=" << cfg.n << '\n'
      << "t-end=" << format_double(cfg.t_end) << '\n'
      << "tol=" << format_double(cfg.newton.tol) << '\n'
      << "theta-des=" << format_double(cfg.newton.theta_des) << '\n'
      << "theta-acc=" << format_double(cfg.newton.theta_acc) << '\n'
      << "alpha0=" << format_double(cfg.newton.alpha0) << '\n'
      << "alpha-fail=" << format_double(cfg.newton.alpha_fail) << '\n'
      << "max-outer=" << cfg.newton.max_outer << '\n'
      << "max-inner=" << cfg.newton.max_inner << '\n';
  switch (cfg.problem) {
    case ProblemKind::GeodesicForce:
      out << "force-scale=" << format_double(cfg.force_scale) << '\n';
      break;
    case ProblemKind::Obstacle:
      out << "h-ref=" << format_double(cfg.h_ref) << '\n'
          << "p0=" << format_double(cfg.p0) << '\n'
          << "p-growth=" << format_double(cfg.p_growth) << '\n'
          << "violation-tol=" << format_double(cfg.violation_tol) << '\n'
          << "max-stages=" << cfg.max_stages << '\n';
      break;
    case ProblemKind::Rod:
      out << "sigma=" << format_double(cfg.sigma) << '\n';
      break;
  }
  if (cfg.gamma0) out << "gamma0=" << format_vec3(*cfg.gamma0) << '\n';
  if (cfg.gamma_t) out << "gamma-t=" << format_vec3(*cfg.gamma_t) << '\n';
  if (cfg.rod_ya) out << "rod-ya=" << format_vec3(*cfg.rod_ya) << '\n';
  if (cfg.rod_yb) out << "rod-yb=" << format_vec3(*cfg.rod_yb) << '\n';
  if (cfg.rod_va) out << "rod-va=" << format_vec3(*cfg.rod_va) << '\n';
  if (cfg.rod_vb) out << "rod-vb=" << format_vec3(*cfg.rod_vb) << '\n';
  out << "out-dir=" << cfg.out_dir.string() << '\n'
      << "seed=" << cfg.seed << '\n';
  return out.str();
}

int run(const RunConfig& input, std::ostream& log) {
  RunConfig cfg;
  std::string stage = "configuration";
  try {
    cfg = input.resolved();
    cfg.validate();
    std::filesystem::create_directories(cfg.out_dir);
    const fem1d::Grid grid(cfg.t_end, cfg.n);
    IterateWriter iterates(cfg.out_dir / "iterates.csv");
    KeyValues results;
    int code = kExitFailure;

    switch (cfg.problem) {
      case ProblemKind::GeodesicForce: {
        stage = "problem setup";
        problems::GeodesicForceProblem problem(
            grid,
            {unit_or_config_error("gamma0", *cfg.gamma0), unit_or_config_error("gamma-t", *cfg.gamma_t)},
            cfg.force_scale);
        stage = "damped Newton";
        auto result = newton::damped_newton(problem, problem.initial_curve(), cfg.newton);
        iterates.write(result.trace);
        write_curve_csv(cfg.out_dir / "curve.csv", result.state);
        add_trace_results(results, result.trace);
        results["residual_inf"] = format_double(problem.residual(result.state).lpNorm<Eigen::Infinity>());
        code = exit_code_for(result.trace.terminated);
        break;
      }
      case ProblemKind::Obstacle: {
        stage = "problem setup";
        problems::ObstacleProblem problem(
            grid,
            {unit_or_config_error("gamma0", *cfg.gamma0), unit_or_config_error("gamma-t", *cfg.gamma_t)},
            {cfg.h_ref, cfg.p0, cfg.p_growth, cfg.violation_tol, cfg.max_stages});
        stage = "penalty path-following";
        auto result = problems::obstacle_path_follow(problem, problem.initial_curve(), cfg.newton);
        std::ofstream stages(cfg.out_dir / "stages.csv");
        stages << "stage,p,violation,outer_iterations,status\n";
        std::size_t total = 0;
        for (std::size_t s = 0; s < result.stages.size(); ++s) {
          const auto& st = result.stages[s];
          iterates.write(st.trace);
          total += st.trace.iterations.size();
          stages << s << ',' << format_double(st.p) << ',' << format_double(st.violation) << ','
                 << st.trace.iterations.size() << ',' << newton::to_string(st.trace.terminated) << '\n';
        }
        write_curve_csv(cfg.out_dir / "curve.csv", result.curve);
        results["status"] = newton::to_string(result.status);
        results["message"] = result.diagnostic.empty() ? "violation below tolerance" : result.diagnostic;
        results["stages"] = std::to_string(result.stages.size());
        results["outer_iterations"] = std::to_string(total);
        double max_height = -1.0;
        for (const auto& y : result.curve.points) max_height = std::max(max_height, y[2]);
        results["final_p"] = format_double(result.stages.empty() ? 0.0 : result.final_penalty());
        results["final_violation"] = format_double(problems::cap_violation(result.curve, cfg.h_ref));
        results["max_height"] = format_double(max_height);
        code = exit_code_for(result.status);
        if (!result.diagnostic.empty()) {
          log << "error in penalty path-following: " << result.diagnostic << '\n';
        }
        break;
      }
      case ProblemKind::Rod: {
        stage = "problem setup";
        problems::RodProblem problem(grid,
                                     {*cfg.rod_ya, *cfg.rod_yb, unit_or_config_error("rod-va", *cfg.rod_va),
                                      unit_or_config_error("rod-vb", *cfg.rod_vb)},
                                     {cfg.sigma});
        stage = "damped Newton";
        auto result = newton::damped_newton(problem, problem.initial_guess(), cfg.newton);
        iterates.write(result.trace);
        write_rod_csv(cfg.out_dir / "curve.csv", result.state);
        add_trace_results(results, result.trace);
        results["constraint_violation"] = format_double(problems::rod_constraint_violation(result.state));
        code = exit_code_for(result.trace.terminated);
        break;
      }
    }
    write_meta(cfg.out_dir / "meta.txt", cfg, results);
    log << to_string(cfg.problem) << ": " << results["status"] << " after " << results["outer_iterations"]
        << " outer iterations\n";
    if (code != kExitConverged) {
      log << "error in " << stage << ": " << results["message"] << '\n';
    }
    return code;
  } catch (const ConfigError& e) {
    log << "configuration error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidArgument && stage == "problem setup") {
      log << "configuration error: " << e.what() << '\n';
      return kExitConfigError;
    }
    log << "error in " << stage << ": " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    log << "configuration error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (!args.empty() && args.front() == "run") {
    args.erase(args.begin());
  }
  std::reverse(args.begin(), args.end());  // CLI11 consumes vectors from the back

  CLI::App app{"Damped Newton solver for variational problems on manifolds", "bundle-newton"};
  std::string problem;
  std::string config_path;
  app.add_option("problem", problem, "geodesic-force, obstacle or rod");
  app.add_option("--config", config_path, "key=value file; flags override its entries");
  std::map<std::string, std::string> flags;
  std::map<std::string, CLI::Option*> options;
  for (const auto& key : config_keys()) {
    if (key == "problem") continue;
    options[key] = app.add_option("--" + key, flags[key]);
  }
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitConverged;
  } catch (const CLI::ParseError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfigError;
  }

  try {
    KeyValues kv;
    if (!config_path.empty()) {
      kv = read_key_value_file(config_path);
    }
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) kv[key] = flags[key];
    }
    if (!problem.empty()) {
      kv["problem"] = problem;
    }
    if (kv.find("problem") == kv.end()) {
      throw ConfigError("no problem given");
    }
    const RunConfig cfg = config_from_key_values(kv);
    return run(cfg, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

}  // namespace bundle_newton::cli
