#include "bundle_newton/geometry.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

namespace bundle_newton::geometry {

namespace {

constexpr double kDegenerateNorm = 1e-12;
constexpr double kTangentTolerance = 1e-10;
constexpr double kRankTolerance = 1e-12;

// Inverse Gram matrix (A A^T)^{-1}; rejects rank-deficient A.
Eigen::MatrixXd inverse_gram(const Eigen::MatrixXd& a) {
  if (a.rows() == 0) {
    return Eigen::MatrixXd(0, 0);
  }
  if (a.rows() > a.cols()) {
    throw Error(ErrorKind::SingularConstraint, "more constraints than variables");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  if (s(0) == 0.0 || s(s.size() - 1) <= kRankTolerance * s(0)) {
    throw Error(ErrorKind::SingularConstraint, "constraint Jacobian is rank deficient");
  }
  return (a * a.transpose()).inverse();
}

void check_tangent(const Eigen::MatrixXd& a, const Eigen::VectorXd& dx) {
  if (a.cols() != dx.size()) {
    throw Error(ErrorKind::DimensionMismatch, "direction does not match constraint Jacobian");
  }
  const double violation = a.rows() == 0 ? 0.0 : (a * dx).lpNorm<Eigen::Infinity>();
  if (violation > kTangentTolerance * (1.0 + dx.lpNorm<Eigen::Infinity>())) {
    std::ostringstream msg;
    msg << "direction not in ker c'(x): |c'(x)dx| = " << violation;
    throw Error(ErrorKind::InvalidArgument, msg.str());
  }
}

}  // namespace

UnitVec3::UnitVec3(const Vec3& coords) : coords_(coords) {
  if (!coords.allFinite() || std::abs(coords.norm() - 1.0) > kNormTolerance) {
    std::ostringstream msg;
    msg << "not a unit vector (norm " << coords.norm() << ")";
    throw Error(ErrorKind::InvalidArgument, msg.str());
  }
}

UnitVec3 UnitVec3::normalized(const Vec3& v) {
  const double n = v.norm();
  if (!(n > kDegenerateNorm)) {
    throw Error(ErrorKind::DegenerateUpdate, "cannot normalize a (near) zero vector");
  }
  return UnitVec3(v / n, Unchecked{});
}

Vec3 tangent_project(const UnitVec3& y, const Vec3& h) {
  const Vec3& p = y.coords();
  return h - p * p.dot(h);
}

Vec3 tangent_project_deriv(const UnitVec3& y, const Vec3& v, const Vec3& u) {
  const Vec3& p = y.coords();
  return -p * v.dot(u) - v * p.dot(u);
}

UnitVec3 retract_sphere(const UnitVec3& y, const Vec3& d) {
  if (d.isZero(0.0)) return y;  // renormalizing would move y by round-off
  return UnitVec3::normalized(y.coords() + d);
}

Vec3 transport_vector(const UnitVec3& from, const UnitVec3& to, const Vec3& u) {
  if (std::abs(from.coords().dot(u)) > kTangentTolerance * (1.0 + u.norm())) {
    throw Error(ErrorKind::InvalidArgument, "transported vector is not tangent at the source point");
  }
  return tangent_project(to, u);
}

TangentBasis tangent_basis(const UnitVec3& y) {
  const Vec3& p = y.coords();
  int axis = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(p[i]) < std::abs(p[axis])) {
      axis = i;
    }
  }
  Vec3 v1 = Vec3::Unit(axis) - p * p[axis];
  v1.normalize();
  Vec3 v2 = p.cross(v1);
  v2.normalize();
  return TangentBasis{y, v1, v2};
}

Eigen::VectorXd normal_multiplier(const Eigen::VectorXd& gradient,
                                  const Eigen::MatrixXd& constraint_jacobian) {
  if (constraint_jacobian.cols() != gradient.size()) {
    throw Error(ErrorKind::DimensionMismatch, "gradient does not match constraint Jacobian");
  }
  return -inverse_gram(constraint_jacobian) * (constraint_jacobian * gradient);
}

Eigen::MatrixXd constraint_projector(const Eigen::MatrixXd& constraint_jacobian) {
  const auto& a = constraint_jacobian;
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(a.cols(), a.cols());
  if (a.rows() > 0) {
    p -= a.transpose() * inverse_gram(a) * a;
  }
  return p;
}

Eigen::MatrixXd constraint_projector_deriv(const Eigen::MatrixXd& constraint_jacobian,
                                           const std::vector<Eigen::MatrixXd>& constraint_hessians,
                                           const Eigen::VectorXd& dx) {
  const auto& a = constraint_jacobian;
  const Eigen::Index n = a.cols();
  if (static_cast<Eigen::Index>(constraint_hessians.size()) != a.rows() || dx.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "constraint data sizes disagree");
  }
  if (a.rows() == 0) {
    return Eigen::MatrixXd::Zero(n, n);
  }
  // Row i of dA is (c_i''(x) dx)^T.
  Eigen::MatrixXd da(a.rows(), n);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (constraint_hessians[i].rows() != n || constraint_hessians[i].cols() != n) {
      throw Error(ErrorKind::DimensionMismatch, "constraint Hessian has wrong shape");
    }
    da.row(i) = (constraint_hessians[i] * dx).transpose();
  }
  const Eigen::MatrixXd g_inv = inverse_gram(a);
  const Eigen::MatrixXd dg = da * a.transpose() + a * da.transpose();
  return -(da.transpose() * g_inv * a + a.transpose() * g_inv * da -
           a.transpose() * g_inv * dg * g_inv * a);
}

Eigen::VectorXd constrained_hessian_apply(const Eigen::MatrixXd& objective_hessian,
                                          const Eigen::MatrixXd& constraint_jacobian,
                                          const std::vector<Eigen::MatrixXd>& constraint_hessians,
                                          const Eigen::VectorXd& lambda,
                                          const Eigen::VectorXd& dx) {
  const Eigen::Index n = dx.size();
  if (objective_hessian.rows() != n || objective_hessian.cols() != n ||
      lambda.size() != constraint_jacobian.rows() ||
      static_cast<Eigen::Index>(constraint_hessians.size()) != constraint_jacobian.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "Hessian data sizes disagree");
  }
  check_tangent(constraint_jacobian, dx);
  inverse_gram(constraint_jacobian);  // rank check only

  Eigen::VectorXd out = objective_hessian * dx;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    out += lambda(i) * (constraint_hessians[i] * dx);
  }
  return out;
}

Eigen::VectorXd projected_hessian_apply(const Eigen::MatrixXd& objective_hessian,
                                        const Eigen::VectorXd& gradient,
                                        const Eigen::MatrixXd& constraint_jacobian,
                                        const std::vector<Eigen::MatrixXd>& constraint_hessians,
                                        const Eigen::VectorXd& dx) {
  check_tangent(constraint_jacobian, dx);
  const Eigen::MatrixXd dp =
      constraint_projector_deriv(constraint_jacobian, constraint_hessians, dx);
  // dP is symmetric, so the covector e -> f'(x) dP e has coefficients dP f'(x).
  return objective_hessian * dx + dp * gradient;
}

}  // namespace bundle_newton::geometry
