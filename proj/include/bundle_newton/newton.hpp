#pragma once

// Affine covariant damped Newton method for mappings F: X -> E* into dual
// vector bundles. A problem supplies, in coordinates of per-node tangent
// bases at the current iterate x:
//   - residual(x)                   b_k = F(x) phi_k
//   - jacobian(x)                   A_kl = (Q*_{F(x)} o F'(x)) phi_l phi_k
//   - transported_residual(x, x+)   F(x+) applied to the test functions of x,
//                                   transported forward to x+
//   - retract(x, xi, alpha)         R_x(alpha * sum_l xi_l phi_l)
//   - norm(x, xi)                   the norm used for the damping control
// The Newton direction solves A xi + b = 0; every simplified Newton step in
// the damping loop reuses the factorization of A.

#include <cmath>
#include <concepts>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bundle_newton/errors.hpp"
#include "bundle_newton/geometry.hpp"

namespace bundle_newton::newton {

using Eigen::VectorXd;

struct NewtonConfig {
  double tol = 1e-10;
  double theta_des = 0.5;
  double theta_acc = 0.9;
  double alpha0 = 1.0;
  double alpha_fail = 1e-8;
  int max_outer = 50;
  int max_inner = 20;

  /// Full steps, every trial accepted. theta_des = theta_acc = +inf keeps
  /// the damping factor pinned at 1.
  static NewtonConfig undamped() {
    NewtonConfig cfg;
    cfg.theta_des = std::numeric_limits<double>::infinity();
    cfg.theta_acc = std::numeric_limits<double>::infinity();
    cfg.alpha0 = 1.0;
    return cfg;
  }

  bool is_undamped() const { return std::isinf(theta_acc); }

  /// Throws InvalidArgument unless
  /// 0 < theta_des < theta_acc < 1 and 0 < alpha_fail < alpha0 <= 1
  /// (or the undamped configuration).
  void validate() const;
};

enum class Termination { Converged, DampingFailed, MaxIterations };

const char* to_string(Termination t);

struct OuterIteration {
  double norm_dx = 0.0;
  double residual_inf = 0.0;       // |b|_inf at the start of the iteration
  double accepted_alpha = 0.0;
  std::vector<double> theta_history;  // one entry per inner trial
  std::vector<double> alpha_history;  // trial alpha per inner trial
  int inner_count = 0;

  double theta_final() const { return theta_history.empty() ? 0.0 : theta_history.back(); }
};

struct NewtonTrace {
  std::vector<OuterIteration> iterations;
  Termination terminated = Termination::MaxIterations;
  std::string message;
};

template <class State>
struct NewtonResult {
  State state;
  NewtonTrace trace;
};

/// Factorized operator with a solve for A x = rhs.
template <class F>
concept Factorization = requires(const F& f, const VectorXd& v) {
  { f.solve(v) } -> std::convertible_to<VectorXd>;
};

template <class M>
concept FactorizableMatrix = requires(const M& m) {
  { m.factorize() } -> Factorization;
};

template <class P>
concept NewtonProblem = requires(const P& p, const typename P::State& x, const VectorXd& xi, double a) {
  typename P::State;
  { p.dof_count(x) } -> std::convertible_to<Eigen::Index>;
  { p.residual(x) } -> std::convertible_to<VectorXd>;
  { p.jacobian(x) } -> FactorizableMatrix;
  { p.transported_residual(x, x) } -> std::convertible_to<VectorXd>;
  { p.retract(x, xi, a) } -> std::convertible_to<typename P::State>;
  { p.norm(x, xi) } -> std::convertible_to<double>;
};

/// xi with A xi + b = 0, given a factorization of A.
template <Factorization F>
VectorXd newton_direction(const F& lu, const VectorXd& b) {
  return -lu.solve(b);
}

/// xi with A xi + b = 0.
template <FactorizableMatrix M>
VectorXd newton_direction(const M& a, const VectorXd& b) {
  return newton_direction(a.factorize(), b);
}

/// Right-hand side of the simplified Newton equation:
/// r_transported - (1 - alpha) r_old.
VectorXd simplified_rhs(const VectorXd& r_transported, const VectorXd& r_old, double alpha);

/// theta = |dx_bar| / |alpha dx|. Throws ZeroStep when |alpha dx| = 0.
double compute_theta(double norm_dx_bar, double norm_dx_scaled);

template <class Norm>
double compute_theta(const VectorXd& dx_bar, const VectorXd& dx_scaled, Norm&& norm) {
  return compute_theta(norm(dx_bar), norm(dx_scaled));
}

/// min(1, alpha theta_des / theta).
double update_alpha(double alpha, double theta, double theta_des);

/// max_i | sum_j xi_{i,j} v_{i,j} |_2 over nodes with the given bases;
/// node i owns coefficients [2i, 2i+2).
double norm_inf_nodal(const VectorXd& xi, const std::vector<geometry::TangentBasis>& bases);

/// Runs the affine covariant damped Newton method from x0. Damping failure
/// and the iteration limit are reported through trace.terminated; linear
/// algebra and geometric errors propagate as exceptions.
template <NewtonProblem P>
NewtonResult<typename P::State> damped_newton(const P& problem, typename P::State x0,
                                              const NewtonConfig& cfg) {
  cfg.validate();
  using State = typename P::State;
  NewtonTrace trace;
  State x = std::move(x0);
  double alpha = cfg.alpha0;
  auto norm = [&](const State& at, const VectorXd& v) { return problem.norm(at, v); };

  for (int k = 0; k < cfg.max_outer; ++k) {
    const VectorXd b = problem.residual(x);
    const auto lu = problem.jacobian(x).factorize();
    const VectorXd dx = newton_direction(lu, b);

    OuterIteration it;
    it.norm_dx = norm(x, dx);
    it.residual_inf = b.size() ? b.template lpNorm<Eigen::Infinity>() : 0.0;

    if (it.norm_dx == 0.0) {
      // x is a zero of F; the (empty) full step is taken.
      it.accepted_alpha = 1.0;
      it.inner_count = 1;
      it.theta_history.push_back(0.0);
      it.alpha_history.push_back(1.0);
      trace.iterations.push_back(std::move(it));
      trace.terminated = Termination::Converged;
      trace.message = "Desired accuracy reached";
      return {std::move(x), std::move(trace)};
    }

    bool accepted = false;
    bool converged_by_size = false;
    State x_plus = x;
    double theta = 0.0;
    double trial_alpha = alpha;
    for (int inner = 0; inner < cfg.max_inner; ++inner) {
      trial_alpha = alpha;
      x_plus = problem.retract(x, dx, trial_alpha);
      const VectorXd rhs = simplified_rhs(problem.transported_residual(x, x_plus), b, trial_alpha);
      const VectorXd dx_bar = newton_direction(lu, rhs);
      const double norm_dx_bar = norm(x, dx_bar);
      theta = compute_theta(norm_dx_bar, trial_alpha * it.norm_dx);
      it.theta_history.push_back(theta);
      it.alpha_history.push_back(trial_alpha);
      ++it.inner_count;

      if (trial_alpha == 1.0 && it.norm_dx <= cfg.tol && norm_dx_bar <= cfg.tol) {
        // Both corrections are below the tolerance. theta is then a ratio of
        // round-off sized quantities and carries no information.
        converged_by_size = true;
        accepted = true;
        break;
      }

      alpha = theta == 0.0 ? 1.0 : update_alpha(trial_alpha, theta, cfg.theta_des);
      if (alpha < cfg.alpha_fail) {
        trace.iterations.push_back(std::move(it));
        trace.terminated = Termination::DampingFailed;
        trace.message = "Newton's method failed: damping factor below alpha_fail";
        return {std::move(x), std::move(trace)};
      }
      if (theta <= cfg.theta_acc) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      trace.iterations.push_back(std::move(it));
      trace.terminated = Termination::DampingFailed;
      trace.message = "Newton's method failed: no acceptable damping factor within max_inner trials";
      return {std::move(x), std::move(trace)};
    }

    it.accepted_alpha = trial_alpha;
    const double norm_dx = it.norm_dx;
    trace.iterations.push_back(std::move(it));
    x = std::move(x_plus);
    if (converged_by_size || (trial_alpha == 1.0 && theta <= 0.25 && norm_dx <= cfg.tol)) {
      trace.terminated = Termination::Converged;
      trace.message = "Desired accuracy reached";
      return {std::move(x), std::move(trace)};
    }
  }
  trace.terminated = Termination::MaxIterations;
  trace.message = "maximum number of outer iterations reached";
  return {std::move(x), std::move(trace)};
}

/// Wraps a problem and multiplies residual, transported residual and
/// Jacobian by a common factor s. The Newton iteration is invariant under
/// this left scaling.
template <NewtonProblem P>
class ScaledProblem {
 public:
  using State = typename P::State;

  ScaledProblem(const P& inner, double scale) : inner_(inner), scale_(scale) {}

  Eigen::Index dof_count(const State& x) const { return inner_.dof_count(x); }
  VectorXd residual(const State& x) const { return scale_ * inner_.residual(x); }
  auto jacobian(const State& x) const {
    auto a = inner_.jacobian(x);
    a *= scale_;
    return a;
  }
  VectorXd transported_residual(const State& x, const State& x_plus) const {
    return scale_ * inner_.transported_residual(x, x_plus);
  }
  State retract(const State& x, const VectorXd& xi, double alpha) const {
    return inner_.retract(x, xi, alpha);
  }
  double norm(const State& x, const VectorXd& xi) const { return inner_.norm(x, xi); }

 private:
  const P& inner_;
  double scale_;
};

}  // namespace bundle_newton::newton
