#include <cmath>

#include "bundle_newton/problems.hpp"

namespace bundle_newton::problems {

namespace {

constexpr double kPoleRadius2 = 1e-12;

double polar_radius2(const Vec3& y) {
  const double rho = y[0] * y[0] + y[1] * y[1];
  if (!(rho > kPoleRadius2)) {
    throw Error(ErrorKind::PoleSingularity, "winding field is singular at the poles");
  }
  return rho;
}

}  // namespace

Covector3 winding_force(const Vec3& y, double scale) {
  const double rho = polar_radius2(y);
  const double g = scale * y[2] / rho;
  return Covector3{g * Vec3(-y[1], y[0], 0.0)};
}

Covector3 winding_force_deriv(const Vec3& y, const Vec3& dy, double scale) {
  const double rho = polar_radius2(y);
  const double g = scale * y[2] / rho;
  const double dg = scale * (dy[2] / rho - 2.0 * y[2] * (y[0] * dy[0] + y[1] * dy[1]) / (rho * rho));
  return Covector3{dg * Vec3(-y[1], y[0], 0.0) + g * Vec3(-dy[1], dy[0], 0.0)};
}

BoundaryPoints default_geodesic_boundary() {
  const double a = 0.3;
  const double b = 0.2;
  return {UnitVec3::normalized(Vec3(std::sin(a), 0.0, -std::cos(a))),
          UnitVec3::normalized(Vec3(-std::sin(a) * std::cos(b), std::sin(a) * std::sin(b), std::cos(a)))};
}

BoundaryPoints default_obstacle_boundary() {
  const double a = 1.2;
  const double b = 0.2;
  return {UnitVec3::normalized(Vec3(std::sin(a), 0.0, std::cos(a))),
          UnitVec3::normalized(Vec3(-std::sin(a) * std::cos(b), std::sin(a) * std::sin(b), std::cos(a)))};
}

GeodesicForceProblem::GeodesicForceProblem(Grid grid, BoundaryPoints boundary, double force_scale)
    : grid_(grid), boundary_(boundary), load_{force_scale} {
  if ((boundary.gamma0.coords() + boundary.gamma_t.coords()).norm() <= 1e-12) {
    throw Error(ErrorKind::InvalidArgument, "boundary points must not be antipodal");
  }
}

NodalCurve GeodesicForceProblem::initial_curve() const {
  return fem1d::great_circle_curve(grid_, boundary_.gamma0, boundary_.gamma_t);
}

VectorXd GeodesicForceProblem::residual(const State& x) const {
  return curve_residual(x, own_tests(x), load_);
}

BlockTriDiag GeodesicForceProblem::jacobian(const State& x) const {
  return curve_jacobian(x, load_);
}

VectorXd GeodesicForceProblem::transported_residual(const State& x, const State& x_plus) const {
  return curve_residual(x_plus, transported_tests(x, x_plus), load_);
}

NodalCurve GeodesicForceProblem::retract(const State& x, const VectorXd& xi, double alpha) const {
  return retract_curve(x, xi, alpha);
}

double GeodesicForceProblem::norm(const State& x, const VectorXd& xi) const {
  return newton::norm_inf_nodal(xi, interior_bases(x));
}

VectorXd geodesic_residual(const NodalCurve& curve, double force_scale) {
  return curve_residual(curve, own_tests(curve), WindingLoad{force_scale});
}

BlockTriDiag geodesic_jacobian(const NodalCurve& curve, double force_scale) {
  return curve_jacobian(curve, WindingLoad{force_scale});
}

}  // namespace bundle_newton::problems
