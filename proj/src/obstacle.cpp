#include <cmath>
#include <sstream>

#include "bundle_newton/problems.hpp"

namespace bundle_newton::problems {

double penalty_max(double x) { return x > 0.0 ? x : 0.0; }

double penalty_max_newton_deriv(double x) { return x > 0.0 ? 1.0 : 0.0; }

Covector3 CapPenaltyLoad::value(const UnitVec3& y) const {
  return Covector3{Vec3(0.0, 0.0, p * penalty_max(y[2] - 1.0 + h_ref))};
}

Covector3 CapPenaltyLoad::deriv(const UnitVec3& y, const Vec3& dy) const {
  return Covector3{Vec3(0.0, 0.0, p * penalty_max_newton_deriv(y[2] - 1.0 + h_ref) * dy[2])};
}

VectorXd obstacle_residual(const NodalCurve& curve, double p, double h_ref) {
  return curve_residual(curve, own_tests(curve), CapPenaltyLoad{p, h_ref});
}

BlockTriDiag obstacle_jacobian(const NodalCurve& curve, double p, double h_ref) {
  return curve_jacobian(curve, CapPenaltyLoad{p, h_ref});
}

double cap_violation(const NodalCurve& curve, double h_ref) {
  double out = 0.0;
  for (const auto& y : curve.points) {
    out = std::max(out, penalty_max(y[2] - 1.0 + h_ref));
  }
  return out;
}

ObstacleProblem::ObstacleProblem(Grid grid, BoundaryPoints boundary, Options options)
    : grid_(grid), boundary_(boundary), options_(options) {
  std::ostringstream msg;
  if (!(options.h_ref > 0.0 && options.h_ref < 1.0)) {
    msg << "h_ref must lie in (0,1)";
  } else if (!(options.p > 0.0)) {
    msg << "penalty must be positive";
  } else if (!(options.p_growth > 1.0)) {
    msg << "penalty growth factor must exceed 1";
  } else if (!(options.violation_tol > 0.0)) {
    msg << "violation tolerance must be positive";
  } else if (boundary.gamma0[2] > 1.0 - options.h_ref || boundary.gamma_t[2] > 1.0 - options.h_ref) {
    msg << "boundary points lie inside the cap";
  } else if ((boundary.gamma0.coords() + boundary.gamma_t.coords()).norm() <= 1e-12) {
    msg << "boundary points must not be antipodal";
  }
  if (msg.tellp() != 0) {
    throw Error(ErrorKind::InvalidArgument, msg.str());
  }
}

void ObstacleProblem::set_penalty(double p) {
  if (!(p > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "penalty must be positive");
  }
  options_.p = p;
}

NodalCurve ObstacleProblem::initial_curve() const {
  return fem1d::great_circle_curve(grid_, boundary_.gamma0, boundary_.gamma_t);
}

VectorXd ObstacleProblem::residual(const State& x) const {
  return curve_residual(x, own_tests(x), load());
}

BlockTriDiag ObstacleProblem::jacobian(const State& x) const { return curve_jacobian(x, load()); }

VectorXd ObstacleProblem::transported_residual(const State& x, const State& x_plus) const {
  return curve_residual(x_plus, transported_tests(x, x_plus), load());
}

NodalCurve ObstacleProblem::retract(const State& x, const VectorXd& xi, double alpha) const {
  return retract_curve(x, xi, alpha);
}

double ObstacleProblem::norm(const State& x, const VectorXd& xi) const {
  return newton::norm_inf_nodal(xi, interior_bases(x));
}

PathFollowResult obstacle_path_follow(const ObstacleProblem& problem, const NodalCurve& start,
                                      const newton::NewtonConfig& cfg) {
  ObstacleProblem stage_problem = problem;
  PathFollowResult out{start, {}, newton::Termination::Converged, {}};
  double p = problem.options().p;
  if (cap_violation(start, problem.options().h_ref) <= problem.options().violation_tol) {
    // A feasible start that already solves the penalized problem needs no stage.
    const VectorXd b = problem.residual(start);
    const VectorXd dx = newton::newton_direction(problem.jacobian(start).factorize(), b);
    if (problem.norm(start, dx) <= cfg.tol) {
      return out;
    }
  }
  for (int stage = 0; stage < problem.options().max_stages; ++stage) {
    stage_problem.set_penalty(p);
    auto result = newton::damped_newton(stage_problem, out.curve, cfg);
    PenaltyStage record{p, cap_violation(result.state, problem.options().h_ref), std::move(result.trace)};
    const auto status = record.trace.terminated;
    out.stages.push_back(std::move(record));
    if (status != newton::Termination::Converged) {
      std::ostringstream msg;
      msg << "stage " << stage << " (p = " << p << ") terminated with " << newton::to_string(status);
      out.status = status;
      out.diagnostic = msg.str();
      return out;
    }
    out.curve = std::move(result.state);
    if (out.stages.back().violation <= problem.options().violation_tol) {
      out.status = newton::Termination::Converged;
      return out;
    }
    p *= problem.options().p_growth;
  }
  out.status = newton::Termination::MaxIterations;
  out.diagnostic = "penalty continuation reached max_stages";
  return out;
}

}  // namespace bundle_newton::problems
