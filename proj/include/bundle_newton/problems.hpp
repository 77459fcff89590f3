#pragma once

// The three built-in problems: an elastic geodesic in a winding force
// field, a geodesic avoiding the north pole cap via a Moreau-Yosida penalty
// with path-following, and an inextensible elastic rod.

#include <functional>
#include <string>
#include <vector>

#include "bundle_newton/fem1d.hpp"
#include "bundle_newton/newton.hpp"
#include "bundle_newton/sphere_curve.hpp"

namespace bundle_newton::problems {

using fem1d::BandedMatrix;

// --- winding force ------------------------------------------------------------

/// omega(y) = scale * y3/(y1^2 + y2^2) <(-y2, y1, 0), .>.
/// Throws PoleSingularity when y1^2 + y2^2 <= 1e-12.
Covector3 winding_force(const Vec3& y, double scale = 3.0);

/// Euclidean directional derivative of the same formula.
Covector3 winding_force_deriv(const Vec3& y, const Vec3& dy, double scale = 3.0);

struct WindingLoad {
  double scale = 3.0;
  Covector3 value(const UnitVec3& y) const { return winding_force(y, scale); }
  Covector3 deriv(const UnitVec3& y, const Vec3& dy) const {
    return winding_force_deriv(y, dy, scale);
  }
};

struct BoundaryPoints {
  UnitVec3 gamma0;
  UnitVec3 gamma_t;
};

/// Almost antipodal pair used by the force-field experiment.
BoundaryPoints default_geodesic_boundary();

/// Pair at height 0.362 whose connecting geodesic passes close to the north
/// pole, so that caps with h_ref up to 0.6 are crossed.
BoundaryPoints default_obstacle_boundary();

// --- elastic geodesic in a force field --------------------------------------

class GeodesicForceProblem {
 public:
  using State = NodalCurve;

  /// Throws InvalidArgument for exactly antipodal boundary points.
  GeodesicForceProblem(Grid grid, BoundaryPoints boundary, double force_scale = 3.0);

  const Grid& grid() const noexcept { return grid_; }
  const BoundaryPoints& boundary() const noexcept { return boundary_; }
  double force_scale() const noexcept { return load_.scale; }

  /// The connecting great-circle geodesic sampled on the grid.
  State initial_curve() const;

  Index dof_count(const State& x) const { return kSphereDofsPerNode * x.grid.n_interior(); }
  VectorXd residual(const State& x) const;
  BlockTriDiag jacobian(const State& x) const;
  VectorXd transported_residual(const State& x, const State& x_plus) const;
  State retract(const State& x, const VectorXd& xi, double alpha) const;
  double norm(const State& x, const VectorXd& xi) const;

 private:
  Grid grid_;
  BoundaryPoints boundary_;
  WindingLoad load_;
};

VectorXd geodesic_residual(const NodalCurve& curve, double force_scale);
BlockTriDiag geodesic_jacobian(const NodalCurve& curve, double force_scale);

// --- obstacle via penalty ---------------------------------------------------

/// max(0, x).
double penalty_max(double x);
/// Newton derivative of max(0, .) with the choice 0 at the kink.
double penalty_max_newton_deriv(double x);

/// p max(0, y3 - 1 + h_ref) e3 and its Newton derivative.
struct CapPenaltyLoad {
  double p = 1.0;
  double h_ref = 0.1;
  Covector3 value(const UnitVec3& y) const;
  Covector3 deriv(const UnitVec3& y, const Vec3& dy) const;
};

VectorXd obstacle_residual(const NodalCurve& curve, double p, double h_ref);
BlockTriDiag obstacle_jacobian(const NodalCurve& curve, double p, double h_ref);

/// Largest constraint violation max_i max(0, y_i3 - 1 + h_ref) over all nodes.
/// The P1 interpolant never rises above its highest node.
double cap_violation(const NodalCurve& curve, double h_ref);

class ObstacleProblem {
 public:
  using State = NodalCurve;

  struct Options {
    double h_ref = 0.1;
    double p = 1.0;
    double p_growth = 1.2;
    double violation_tol = 1e-3;
    int max_stages = 500;
  };

  /// Throws InvalidArgument unless h_ref in (0,1), p > 0, p_growth > 1 and
  /// both boundary points satisfy the cap constraint.
  ObstacleProblem(Grid grid, BoundaryPoints boundary, Options options);

  const Grid& grid() const noexcept { return grid_; }
  const BoundaryPoints& boundary() const noexcept { return boundary_; }
  const Options& options() const noexcept { return options_; }
  double penalty() const noexcept { return options_.p; }
  void set_penalty(double p);

  State initial_curve() const;

  Index dof_count(const State& x) const { return kSphereDofsPerNode * x.grid.n_interior(); }
  VectorXd residual(const State& x) const;
  BlockTriDiag jacobian(const State& x) const;
  VectorXd transported_residual(const State& x, const State& x_plus) const;
  State retract(const State& x, const VectorXd& xi, double alpha) const;
  double norm(const State& x, const VectorXd& xi) const;

 private:
  CapPenaltyLoad load() const { return {options_.p, options_.h_ref}; }

  Grid grid_;
  BoundaryPoints boundary_;
  Options options_;
};

struct PenaltyStage {
  double p = 0.0;
  double violation = 0.0;
  newton::NewtonTrace trace;
};

struct PathFollowResult {
  NodalCurve curve;            // last curve whose stage converged
  std::vector<PenaltyStage> stages;
  newton::Termination status = newton::Termination::Converged;
  std::string diagnostic;

  double final_penalty() const { return stages.empty() ? 0.0 : stages.back().p; }
  double final_violation() const { return stages.empty() ? 0.0 : stages.back().violation; }
};

/// Solves the penalized problem for p = p0, p0 g, p0 g^2, ... warm-starting
/// each stage from the previous solution, until the cap violation is at most
/// violation_tol. A stage that fails to converge stops the continuation and
/// the last converged curve is returned with the failing stage's status.
PathFollowResult obstacle_path_follow(const ObstacleProblem& problem, const NodalCurve& start,
                                      const newton::NewtonConfig& cfg);

// --- inextensible elastic rod ---------------------------------------------

/// Optional force field on the rod centerline, as a covector on R^3.
struct RodForce {
  std::function<Vec3(const Vec3&)> value;
  std::function<Vec3(const Vec3&, const Vec3&)> deriv;

  bool active() const { return static_cast<bool>(value); }
};

struct RodBoundary {
  Vec3 y_a;
  Vec3 y_b;
  UnitVec3 v_a;
  UnitVec3 v_b;
};

/// y(0) = 0, y(1) = (0.8, 0, 0), v(0) = (1,0,2)/sqrt(5), v(1) = (1,0,0.8)/sqrt(1.64).
RodBoundary default_rod_boundary();

/// Centerline y (P1), unit tangent field v (P1) and multiplier lambda (P0,
/// one value per interval).
struct RodState {
  Grid grid;
  std::vector<Vec3> y;
  std::vector<UnitVec3> v;
  std::vector<Vec3> lambda;
};

/// Dof layout: per interval e the multiplier block lambda_e (3 dofs),
/// followed by the interior node e+1 as y (3 dofs) and v (2 dofs). The
/// ordering keeps the Newton matrix banded with bandwidth 9.
struct RodLayout {
  static constexpr int kStride = 8;
  static constexpr int kBandwidth = 9;
  int n_interior;

  Index size() const { return static_cast<Index>(kStride) * n_interior + 3; }
  Index lambda(int e) const { return static_cast<Index>(kStride) * e; }
  /// -1 for boundary nodes.
  Index y(int i) const { return interior(i) ? static_cast<Index>(kStride) * (i - 1) + 3 : -1; }
  Index v(int i) const { return interior(i) ? static_cast<Index>(kStride) * (i - 1) + 6 : -1; }
  bool interior(int i) const { return i >= 1 && i <= n_interior; }
};

/// Affine centerline, normalized affine tangent field, zero multiplier.
/// Throws DegenerateUpdate when the interpolated tangent passes through 0.
RodState rod_initial_guess(const Grid& grid, const RodBoundary& boundary);

class RodProblem {
 public:
  using State = RodState;

  /// `sigma` holds one stiffness per interval or a single value.
  RodProblem(Grid grid, RodBoundary boundary, std::vector<double> sigma = {1.0},
             RodForce force = {});

  const Grid& grid() const noexcept { return grid_; }
  const RodBoundary& boundary() const noexcept { return boundary_; }
  RodLayout layout() const { return {grid_.n_interior()}; }
  double sigma(int interval) const;

  State initial_guess() const { return rod_initial_guess(grid_, boundary_); }

  Index dof_count(const State&) const { return layout().size(); }
  VectorXd residual(const State& x) const;
  BandedMatrix jacobian(const State& x) const;
  VectorXd transported_residual(const State& x, const State& x_plus) const;
  State retract(const State& x, const VectorXd& xi, double alpha) const;
  /// Largest Euclidean norm over the per-node y, v and per-interval lambda
  /// components.
  double norm(const State& x, const VectorXd& xi) const;

 private:
  VectorXd residual_with_tests(const State& x, const std::vector<std::array<Vec3, 2>>& v_tests) const;

  Grid grid_;
  RodBoundary boundary_;
  std::vector<double> sigma_;
  RodForce force_;
};

VectorXd rod_residual(const RodState& state, const std::vector<double>& sigma, const RodForce& omega);
BandedMatrix rod_jacobian(const RodState& state, const std::vector<double>& sigma, const RodForce& omega);

/// max_e |(y_{e+1} - y_e)/h - (v_e + v_{e+1})/2|_inf.
double rod_constraint_violation(const RodState& state);

}  // namespace bundle_newton::problems
