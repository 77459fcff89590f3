#pragma once

// Shared discretization for variational problems on P1 curves in S^2 of
// the form
//   F(gamma) phi = int <gamma', phi'> + load(gamma) phi dt,
// with boundary values fixed. The dual connection is induced by the
// projection transport, so the Newton matrix is
//   A(phi2, phi1) = F(gamma)(P'(gamma) phi2 phi1) + F_euclid'(gamma) phi2 phi1,
// with all integrals evaluated by the trapezoidal rule.

#include <array>
#include <utility>
#include <vector>

#include "bundle_newton/fem1d.hpp"
#include "bundle_newton/geometry.hpp"

namespace bundle_newton::problems {

using fem1d::BlockTriDiag;
using fem1d::Grid;
using fem1d::NodalCurve;
using geometry::Covector3;
using geometry::TangentBasis;
using geometry::UnitVec3;
using geometry::Vec3;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr int kSphereDofsPerNode = 2;

/// Tangent bases of every node 0..N+1 (boundary bases are unused).
std::vector<TangentBasis> curve_bases(const NodalCurve& curve);

/// Interior-node bases only, in dof order.
std::vector<TangentBasis> interior_bases(const NodalCurve& curve);

/// Ambient test vectors per node; tests[i][j] stands for phi_{(i-1)m+j}(t_i).
using NodalTests = std::vector<std::array<Vec3, 2>>;

/// A pointwise load: value(y) is a covector on R^3 and deriv(y, dy) its
/// (Newton-)derivative in direction dy.
template <class L>
concept PointwiseLoad = requires(const L& l, const UnitVec3& y, const Vec3& d) {
  { l.value(y) } -> std::convertible_to<Covector3>;
  { l.deriv(y, d) } -> std::convertible_to<Covector3>;
};

/// Residual b_k = F(curve) phi_k with the nodal test vectors `tests`.
template <PointwiseLoad Load>
VectorXd curve_residual(const NodalCurve& curve, const NodalTests& tests, const Load& load);

/// Newton matrix in the bases of `curve`.
template <PointwiseLoad Load>
BlockTriDiag curve_jacobian(const NodalCurve& curve, const Load& load);

/// Nodewise retraction R_{y_i}(alpha sum_j xi_{i,j} v_{i,j}) of the interior nodes.
NodalCurve retract_curve(const NodalCurve& curve, const VectorXd& xi, double alpha);

/// Test vectors of `from` transported to `to` by projection.
NodalTests transported_tests(const NodalCurve& from, const NodalCurve& to);

/// Test vectors of `curve` itself.
NodalTests own_tests(const NodalCurve& curve);

// --- template implementation ---------------------------------------------

template <PointwiseLoad Load>
VectorXd curve_residual(const NodalCurve& curve, const NodalTests& tests, const Load& load) {
  const Grid& grid = curve.grid;
  const double h = grid.h();
  const int m = kSphereDofsPerNode;
  // Covector values at interior nodes, evaluated once.
  std::vector<Covector3> w(static_cast<std::size_t>(grid.n_nodes()));
  for (int i = 1; i <= grid.n_interior(); ++i) {
    w[static_cast<std::size_t>(i)] = load.value(curve[i]);
  }
  VectorXd b;
  fem1d::assemble_nodal(
      grid, m,
      [&](int e) {
        fem1d::NodalElement local{VectorXd::Zero(2 * m), MatrixXd()};
        const Vec3 slope = fem1d::fd_slope(curve[e], curve[e + 1], h);
        for (int a = 0; a < 2; ++a) {
          const auto node = static_cast<std::size_t>(e + a);
          const double sign = a == 0 ? -1.0 : 1.0;
          for (int j = 0; j < m; ++j) {
            const Vec3& v = tests[node][static_cast<std::size_t>(j)];
            local.residual(a * m + j) = h * slope.dot(sign * v / h) + 0.5 * h * w[node](v);
          }
        }
        return local;
      },
      &b, nullptr);
  return b;
}

template <PointwiseLoad Load>
BlockTriDiag curve_jacobian(const NodalCurve& curve, const Load& load) {
  const Grid& grid = curve.grid;
  const double h = grid.h();
  const int m = kSphereDofsPerNode;
  const std::vector<TangentBasis> bases = curve_bases(curve);
  std::vector<Covector3> w(static_cast<std::size_t>(grid.n_nodes()));
  for (int i = 1; i <= grid.n_interior(); ++i) {
    w[static_cast<std::size_t>(i)] = load.value(curve[i]);
  }
  BlockTriDiag a(grid.n_interior(), m);
  VectorXd unused;
  fem1d::assemble_nodal(
      grid, m,
      [&](int e) {
        fem1d::NodalElement local{VectorXd::Zero(2 * m), MatrixXd::Zero(2 * m, 2 * m)};
        const Vec3 slope = fem1d::fd_slope(curve[e], curve[e + 1], h);
        for (int ta = 0; ta < 2; ++ta) {        // test node
          if (e + ta == 0 || e + ta == grid.n_nodes() - 1) {
            continue;  // eliminated boundary row
          }
          const auto tnode = static_cast<std::size_t>(e + ta);
          const double tsign = ta == 0 ? -1.0 : 1.0;
          for (int da = 0; da < 2; ++da) {      // direction node
            if (e + da == 0 || e + da == grid.n_nodes() - 1) {
              continue;
            }
            const auto dnode = static_cast<std::size_t>(e + da);
            const double dsign = da == 0 ? -1.0 : 1.0;
            for (int k = 0; k < m; ++k) {
              const Vec3& test = bases[tnode][k];
              for (int l = 0; l < m; ++l) {
                const Vec3& dir = bases[dnode][l];
                // Euclidean stiffness h <dir'/h, test'/h>.
                double value = h * (dsign * dir / h).dot(tsign * test / h);
                if (ta == da) {
                  const UnitVec3& y = curve[e + ta];
                  // Connection term F(gamma)(P'(y) dir test) at this node.
                  const Vec3 p = geometry::tangent_project_deriv(y, dir, test);
                  value += h * slope.dot(tsign * p / h) + 0.5 * h * w[tnode](p);
                  // Derivative of the load.
                  value += 0.5 * h * load.deriv(y, dir)(test);
                }
                local.jacobian(ta * m + k, da * m + l) = value;
              }
            }
          }
        }
        return local;
      },
      &unused, &a);
  return a;
}

}  // namespace bundle_newton::problems
