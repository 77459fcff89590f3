#pragma once

// Primitives for the unit sphere S^2 embedded in R^3 and for submanifolds of
// R^n cut out by equality constraints. Tangent spaces are identified with
// subspaces of the ambient space; transports and connections are induced by
// orthogonal projection.

#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "bundle_newton/errors.hpp"

namespace bundle_newton::geometry {

using Vec3 = Eigen::Vector3d;

/// A point on S^2. Construction checks the unit-norm invariant.
class UnitVec3 {
 public:
  static constexpr double kNormTolerance = 1e-12;

  /// Throws InvalidArgument unless |coords| = 1 within kNormTolerance.
  explicit UnitVec3(const Vec3& coords);

  /// Normalizes `v`; throws DegenerateUpdate if |v| <= 1e-12.
  static UnitVec3 normalized(const Vec3& v);

  static UnitVec3 e1() { return UnitVec3(Vec3::UnitX()); }
  static UnitVec3 e2() { return UnitVec3(Vec3::UnitY()); }
  static UnitVec3 e3() { return UnitVec3(Vec3::UnitZ()); }

  const Vec3& coords() const noexcept { return coords_; }
  double operator[](int i) const { return coords_[i]; }

  operator const Vec3&() const noexcept { return coords_; }  // NOLINT

 private:
  struct Unchecked {};
  UnitVec3(const Vec3& coords, Unchecked) : coords_(coords) {}

  Vec3 coords_;
};

/// A linear functional on R^3 acting through the Euclidean pairing.
struct Covector3 {
  Vec3 coeffs = Vec3::Zero();

  double operator()(const Vec3& u) const { return coeffs.dot(u); }
};

/// Orthonormal basis {v1, v2} of the tangent plane at `base`.
struct TangentBasis {
  UnitVec3 base;
  Vec3 v1;
  Vec3 v2;

  const Vec3& operator[](int j) const { return j == 0 ? v1 : v2; }

  /// Ambient vector sum_j xi_j v_j.
  Vec3 combine(double xi1, double xi2) const { return xi1 * v1 + xi2 * v2; }
};

/// P(y)h = h - y<y,h>.
Vec3 tangent_project(const UnitVec3& y, const Vec3& h);

/// (P'(y)v)u = -y<v,u> - v<y,u>, evaluated for arbitrary v and u.
Vec3 tangent_project_deriv(const UnitVec3& y, const Vec3& v, const Vec3& u);

/// (y + d)/|y + d|. Throws DegenerateUpdate when |y + d| <= 1e-12.
UnitVec3 retract_sphere(const UnitVec3& y, const Vec3& d);

/// Transport of a tangent vector at `from` to the tangent plane at `to`
/// by orthogonal projection. The result may vanish when u is parallel to
/// `to`. Throws InvalidArgument if u is not tangent at `from` (1e-10).
Vec3 transport_vector(const UnitVec3& from, const UnitVec3& to, const Vec3& u);

/// Deterministic orthonormal tangent basis: Gram-Schmidt applied to the
/// coordinate axis least aligned with y, completed by a cross product.
TangentBasis tangent_basis(const UnitVec3& y);

// --- Submanifolds {c(x) = 0} of R^n --------------------------------------

/// Lagrange multiplier of the normal-space stationarity system
/// (f'(x) + lambda c'(x)) w = 0 for all w orthogonal to ker c'(x).
/// `constraint_jacobian` holds one row per constraint.
/// Throws SingularConstraint if the rows are linearly dependent.
Eigen::VectorXd normal_multiplier(const Eigen::VectorXd& gradient,
                                  const Eigen::MatrixXd& constraint_jacobian);

/// Orthogonal projector onto ker c'(x).
Eigen::MatrixXd constraint_projector(const Eigen::MatrixXd& constraint_jacobian);

/// Directional derivative of the projector onto ker c'(x) in direction dx,
/// given the constraint second derivatives (one symmetric n x n matrix per
/// constraint).
Eigen::MatrixXd constraint_projector_deriv(const Eigen::MatrixXd& constraint_jacobian,
                                           const std::vector<Eigen::MatrixXd>& constraint_hessians,
                                           const Eigen::VectorXd& dx);

/// Covariant second derivative on {c = 0} in Lagrangian form:
/// returns f''(x)dx + sum_i lambda_i c_i''(x)dx, valid as a covector on
/// ker c'(x). Requires dx in ker c'(x) within 1e-10 and a full-rank
/// constraint Jacobian (SingularConstraint otherwise).
Eigen::VectorXd constrained_hessian_apply(const Eigen::MatrixXd& objective_hessian,
                                          const Eigen::MatrixXd& constraint_jacobian,
                                          const std::vector<Eigen::MatrixXd>& constraint_hessians,
                                          const Eigen::VectorXd& lambda,
                                          const Eigen::VectorXd& dx);

/// The same covector through the projection route:
/// f''(x)dx + f'(x) P'(x)dx, with P the projector onto ker c'(x).
Eigen::VectorXd projected_hessian_apply(const Eigen::MatrixXd& objective_hessian,
                                        const Eigen::VectorXd& gradient,
                                        const Eigen::MatrixXd& constraint_jacobian,
                                        const std::vector<Eigen::MatrixXd>& constraint_hessians,
                                        const Eigen::VectorXd& dx);

}  // namespace bundle_newton::geometry
