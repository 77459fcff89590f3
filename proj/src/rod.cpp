#include <array>
#include <cmath>
#include <sstream>

#include "bundle_newton/problems.hpp"

namespace bundle_newton::problems {

namespace {

constexpr int kLocalDofs = 13;
// Local ordering within one interval: y_e, v_e, lambda_e, y_{e+1}, v_{e+1}.
constexpr int kLy0 = 0;
constexpr int kLv0 = 3;
constexpr int kLlam = 5;
constexpr int kLy1 = 8;
constexpr int kLv1 = 11;

using VTests = std::vector<std::array<Vec3, 2>>;

std::vector<Index> element_dofs(const RodLayout& layout, int e) {
  std::vector<Index> dofs(kLocalDofs, -1);
  auto fill = [&](int local, Index global, int count) {
    for (int c = 0; c < count; ++c) {
      dofs[static_cast<std::size_t>(local + c)] = global < 0 ? -1 : global + c;
    }
  };
  fill(kLy0, layout.y(e), 3);
  fill(kLv0, layout.v(e), 2);
  fill(kLlam, layout.lambda(e), 3);
  fill(kLy1, layout.y(e + 1), 3);
  fill(kLv1, layout.v(e + 1), 2);
  return dofs;
}

VTests basis_tests(const RodState& x) {
  VTests out;
  out.reserve(x.v.size());
  for (const auto& v : x.v) {
    const TangentBasis b = geometry::tangent_basis(v);
    out.push_back({b.v1, b.v2});
  }
  return out;
}

void check_state(const RodState& x) {
  const auto nodes = static_cast<std::size_t>(x.grid.n_nodes());
  if (x.y.size() != nodes || x.v.size() != nodes ||
      x.lambda.size() != static_cast<std::size_t>(x.grid.n_intervals())) {
    throw Error(ErrorKind::DimensionMismatch, "rod state does not match its grid");
  }
}

}  // namespace

RodBoundary default_rod_boundary() {
  return {Vec3(0.0, 0.0, 0.0), Vec3(0.8, 0.0, 0.0),
          UnitVec3::normalized(Vec3(1.0, 0.0, 2.0)),
          UnitVec3::normalized(Vec3(1.0, 0.0, 0.8))};
}

RodState rod_initial_guess(const Grid& grid, const RodBoundary& boundary) {
  RodState s{grid, {}, {}, {}};
  const int nodes = grid.n_nodes();
  s.y.reserve(static_cast<std::size_t>(nodes));
  s.v.reserve(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) {
    const double t = grid.node(i) / grid.t_end();
    s.y.push_back((1.0 - t) * boundary.y_a + t * boundary.y_b);
    if (i == 0) {
      s.v.push_back(boundary.v_a);
    } else if (i == nodes - 1) {
      s.v.push_back(boundary.v_b);
    } else {
      s.v.push_back(UnitVec3::normalized((1.0 - t) * boundary.v_a.coords() + t * boundary.v_b.coords()));
    }
  }
  s.y.front() = boundary.y_a;
  s.y.back() = boundary.y_b;
  s.lambda.assign(static_cast<std::size_t>(grid.n_intervals()), Vec3::Zero());
  return s;
}

RodProblem::RodProblem(Grid grid, RodBoundary boundary, std::vector<double> sigma, RodForce force)
    : grid_(grid), boundary_(boundary), sigma_(std::move(sigma)), force_(std::move(force)) {
  if (sigma_.size() != 1 && sigma_.size() != static_cast<std::size_t>(grid.n_intervals())) {
    throw Error(ErrorKind::DimensionMismatch, "sigma needs one value or one per interval");
  }
  for (double s : sigma_) {
    if (!(s > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "flexural stiffness must be positive");
    }
  }
  if (force_.active() && !force_.deriv) {
    throw Error(ErrorKind::InvalidArgument, "rod force needs a derivative");
  }
}

double RodProblem::sigma(int interval) const {
  return sigma_.size() == 1 ? sigma_.front() : sigma_[static_cast<std::size_t>(interval)];
}

VectorXd RodProblem::residual_with_tests(const State& x, const VTests& v_tests) const {
  check_state(x);
  const RodLayout lay = layout();
  const double h = grid_.h();
  VectorXd b = VectorXd::Zero(lay.size());
  for (int e = 0; e < grid_.n_intervals(); ++e) {
    const auto l = static_cast<std::size_t>(e);
    const Vec3& yl = x.y[l];
    const Vec3& yr = x.y[l + 1];
    const Vec3& vl = x.v[l].coords();
    const Vec3& vr = x.v[l + 1].coords();
    const Vec3& lam = x.lambda[l];
    const double s = sigma(e);

    fem1d::IndexedElement el{element_dofs(lay, e), VectorXd::Zero(kLocalDofs), MatrixXd()};
    Vec3 force_l = Vec3::Zero();
    Vec3 force_r = Vec3::Zero();
    if (force_.active()) {
      force_l = force_.value(yl);
      force_r = force_.value(yr);
    }
    // int omega(y) phi_y + lambda(phi_y')
    el.residual.segment<3>(kLy0) = -lam + 0.5 * h * force_l;
    el.residual.segment<3>(kLy1) = lam + 0.5 * h * force_r;
    // int sigma <v', phi_v'> - lambda(phi_v)
    const Vec3 dv = fem1d::fd_slope(vl, vr, h);
    for (int k = 0; k < 2; ++k) {
      const Vec3& tl = v_tests[l][static_cast<std::size_t>(k)];
      const Vec3& tr = v_tests[l + 1][static_cast<std::size_t>(k)];
      el.residual(kLv0 + k) = h * s * dv.dot(-tl / h) - 0.5 * h * lam.dot(tl);
      el.residual(kLv1 + k) = h * s * dv.dot(tr / h) - 0.5 * h * lam.dot(tr);
    }
    // int phi_lambda (y' - v)
    el.residual.segment<3>(kLlam) = h * (fem1d::fd_slope(yl, yr, h) - 0.5 * (vl + vr));
    fem1d::scatter(el, &b, nullptr);
  }
  return b;
}

VectorXd RodProblem::residual(const State& x) const { return residual_with_tests(x, basis_tests(x)); }

VectorXd RodProblem::transported_residual(const State& x, const State& x_plus) const {
  check_state(x);
  check_state(x_plus);
  VTests tests = basis_tests(x);
  for (std::size_t i = 0; i < tests.size(); ++i) {
    for (auto& t : tests[i]) {
      t = geometry::transport_vector(x.v[i], x_plus.v[i], t);
    }
  }
  return residual_with_tests(x_plus, tests);
}

BandedMatrix RodProblem::jacobian(const State& x) const {
  check_state(x);
  const RodLayout lay = layout();
  const double h = grid_.h();
  const VTests bases = basis_tests(x);
  BandedMatrix a(lay.size(), RodLayout::kBandwidth, RodLayout::kBandwidth);
  for (int e = 0; e < grid_.n_intervals(); ++e) {
    const auto l = static_cast<std::size_t>(e);
    const Vec3& vl = x.v[l].coords();
    const Vec3& vr = x.v[l + 1].coords();
    const Vec3& lam = x.lambda[l];
    const double s = sigma(e);
    const Vec3 dv = fem1d::fd_slope(vl, vr, h);

    fem1d::IndexedElement el{element_dofs(lay, e), VectorXd::Zero(kLocalDofs),
                             MatrixXd::Zero(kLocalDofs, kLocalDofs)};
    MatrixXd& k = el.jacobian;
    // y rows: lambda coupling and force derivative.
    k.block<3, 3>(kLy0, kLlam) = -Eigen::Matrix3d::Identity();
    k.block<3, 3>(kLy1, kLlam) = Eigen::Matrix3d::Identity();
    if (force_.active()) {
      for (int c = 0; c < 3; ++c) {
        k.block<3, 1>(kLy0, kLy0 + c) = 0.5 * h * force_.deriv(x.y[l], Vec3::Unit(c));
        k.block<3, 1>(kLy1, kLy1 + c) = 0.5 * h * force_.deriv(x.y[l + 1], Vec3::Unit(c));
      }
    }
    // lambda rows: derivative of h (y' - (v_e + v_{e+1})/2).
    k.block<3, 3>(kLlam, kLy0) = -Eigen::Matrix3d::Identity();
    k.block<3, 3>(kLlam, kLy1) = Eigen::Matrix3d::Identity();
    const int v_local[2] = {kLv0, kLv1};
    const double v_sign[2] = {-1.0, 1.0};
    for (int b = 0; b < 2; ++b) {
      for (int c = 0; c < 2; ++c) {
        k.block<3, 1>(kLlam, v_local[b] + c) = -0.5 * h * bases[l + static_cast<std::size_t>(b)][static_cast<std::size_t>(c)];
      }
    }
    // v rows.
    for (int ta = 0; ta < 2; ++ta) {
      const auto tnode = l + static_cast<std::size_t>(ta);
      for (int kk = 0; kk < 2; ++kk) {
        const Vec3& test = bases[tnode][static_cast<std::size_t>(kk)];
        const int row = v_local[ta] + kk;
        k.block<1, 3>(row, kLlam) = -0.5 * h * test.transpose();
        for (int da = 0; da < 2; ++da) {
          const auto dnode = l + static_cast<std::size_t>(da);
          for (int ll = 0; ll < 2; ++ll) {
            const Vec3& dir = bases[dnode][static_cast<std::size_t>(ll)];
            double value = s * v_sign[ta] * v_sign[da] * dir.dot(test) / h;
            if (ta == da) {
              const Vec3 p = geometry::tangent_project_deriv(x.v[tnode], dir, test);
              value += h * s * dv.dot(v_sign[ta] * p / h) - 0.5 * h * lam.dot(p);
            }
            k(row, v_local[da] + ll) = value;
          }
        }
      }
    }
    fem1d::scatter(el, nullptr, &a);
  }
  return a;
}

RodState RodProblem::retract(const State& x, const VectorXd& xi, double alpha) const {
  check_state(x);
  const RodLayout lay = layout();
  if (xi.size() != lay.size()) {
    throw Error(ErrorKind::DimensionMismatch, "direction does not match the rod layout");
  }
  RodState out = x;
  for (int i = 1; i <= grid_.n_interior(); ++i) {
    const auto n = static_cast<std::size_t>(i);
    out.y[n] += alpha * xi.segment<3>(lay.y(i));
    const TangentBasis b = geometry::tangent_basis(x.v[n]);
    out.v[n] = geometry::retract_sphere(x.v[n], alpha * b.combine(xi(lay.v(i)), xi(lay.v(i) + 1)));
  }
  for (int e = 0; e < grid_.n_intervals(); ++e) {
    out.lambda[static_cast<std::size_t>(e)] += alpha * xi.segment<3>(lay.lambda(e));
  }
  return out;
}

double RodProblem::norm(const State& x, const VectorXd& xi) const {
  const RodLayout lay = layout();
  if (xi.size() != lay.size()) {
    throw Error(ErrorKind::DimensionMismatch, "direction does not match the rod layout");
  }
  double out = 0.0;
  for (int i = 1; i <= grid_.n_interior(); ++i) {
    const TangentBasis b = geometry::tangent_basis(x.v[static_cast<std::size_t>(i)]);
    out = std::max(out, xi.segment<3>(lay.y(i)).norm());
    out = std::max(out, b.combine(xi(lay.v(i)), xi(lay.v(i) + 1)).norm());
  }
  for (int e = 0; e < grid_.n_intervals(); ++e) {
    out = std::max(out, xi.segment<3>(lay.lambda(e)).norm());
  }
  return out;
}

namespace {

RodProblem problem_for(const RodState& state, const std::vector<double>& sigma, const RodForce& omega) {
  check_state(state);
  return RodProblem(state.grid, {state.y.front(), state.y.back(), state.v.front(), state.v.back()},
                    sigma, omega);
}

}  // namespace

VectorXd rod_residual(const RodState& state, const std::vector<double>& sigma, const RodForce& omega) {
  return problem_for(state, sigma, omega).residual(state);
}

BandedMatrix rod_jacobian(const RodState& state, const std::vector<double>& sigma, const RodForce& omega) {
  return problem_for(state, sigma, omega).jacobian(state);
}

double rod_constraint_violation(const RodState& state) {
  check_state(state);
  const double h = state.grid.h();
  double out = 0.0;
  for (std::size_t e = 0; e + 1 < state.y.size(); ++e) {
    const Vec3 r = fem1d::fd_slope(state.y[e], state.y[e + 1], h) -
                   0.5 * (state.v[e].coords() + state.v[e + 1].coords());
    out = std::max(out, r.lpNorm<Eigen::Infinity>());
  }
  return out;
}

}  // namespace bundle_newton::problems
