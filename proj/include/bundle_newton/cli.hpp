#pragma once

// Front end shared by the bundle-newton tool and its tests: configuration
// from flat key=value files and flags, running a named problem, and
// writing iterates.csv, curve.csv and meta.txt.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bundle_newton/geometry.hpp"
#include "bundle_newton/newton.hpp"

namespace bundle_newton::cli {

enum class ProblemKind { GeodesicForce, Obstacle, Rod };

const char* to_string(ProblemKind kind);
ProblemKind parse_problem(const std::string& name);

/// Raised for anything wrong with the configuration; maps to exit code 4.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int {
  kExitConverged = 0,
  kExitFailure = 1,
  kExitDampingFailed = 2,
  kExitMaxIterations = 3,
  kExitConfigError = 4,
};

struct RunConfig {
  ProblemKind problem = ProblemKind::GeodesicForce;
  int n = 100;
  double t_end = 1.0;
  newton::NewtonConfig newton;

  double force_scale = 3.0;

  double h_ref = 0.1;
  double p0 = 1.0;
  double p_growth = 1.2;
  double violation_tol = 1e-3;
  int max_stages = 500;

  double sigma = 1.0;

  // Boundary data; unset values resolve to the problem's defaults.
  std::optional<geometry::Vec3> gamma0;
  std::optional<geometry::Vec3> gamma_t;
  std::optional<geometry::Vec3> rod_ya;
  std::optional<geometry::Vec3> rod_yb;
  std::optional<geometry::Vec3> rod_va;
  std::optional<geometry::Vec3> rod_vb;

  std::filesystem::path out_dir = ".";
  std::uint64_t seed = 0;

  /// Fills every unset boundary value with the problem default.
  RunConfig resolved() const;
  /// Throws ConfigError on invalid values.
  void validate() const;
};

using KeyValues = std::map<std::string, std::string>;

/// Parses `key=value` lines; blank lines and lines starting with '#' are
/// skipped. Throws ConfigError on malformed lines.
KeyValues parse_key_values(std::istream& in);
KeyValues read_key_value_file(const std::filesystem::path& path);

/// Builds a configuration from keys named like the long flags (n, tol,
/// theta-des, ...). Keys starting with "result." are ignored so that a
/// meta.txt can be fed back through --config.
RunConfig config_from_key_values(const KeyValues& kv);

/// The configuration as key=value lines with 17 significant digits.
std::string to_key_values(const RunConfig& cfg);

/// Keys accepted in configuration files and as --flags.
const std::vector<std::string>& config_keys();

std::string format_double(double x);

/// Runs the configured problem, writes the output files into out_dir and
/// returns the exit code. Progress and errors go to `log`.
int run(const RunConfig& cfg, std::ostream& log);

/// Entry point of the tool: `bundle-newton [run] <problem> [--flag value ...]`.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace bundle_newton::cli
