#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bundle_newton/problems.hpp"
#include "support/oracles.hpp"

using namespace bundle_newton;
using namespace bundle_newton::problems;
using oracles::Rng;

namespace {

double rel_asym(const Eigen::MatrixXd& a) {
  return (a - a.transpose()).cwiseAbs().maxCoeff() / a.cwiseAbs().maxCoeff();
}

/// Residual of the curve problems evaluated node by node from the
/// discrete energy: <(2y_i - y_{i-1} - y_{i+1})/h, v> + h w(y_i) v.
template <class Load>
Eigen::VectorXd nodal_oracle(const NodalCurve& c, const Load& load) {
  const double h = c.grid.h();
  const int n = c.grid.n_interior();
  Eigen::VectorXd r(2 * n);
  for (int i = 1; i <= n; ++i) {
    const auto basis = geometry::tangent_basis(c[i]);
    const Vec3 second = (2.0 * c[i].coords() - c[i - 1].coords() - c[i + 1].coords()) / h;
    for (int j = 0; j < 2; ++j) {
      r[2 * (i - 1) + j] = second.dot(basis[j]) + h * load(c[i].coords()).dot(basis[j]);
    }
  }
  return r;
}

NodalCurve equator_arc(const Grid& g, double angle) {
  std::vector<UnitVec3> pts;
  for (int i = 0; i < g.n_nodes(); ++i) {
    const double t = angle * g.node(i) / g.t_end();
    pts.push_back(UnitVec3::normalized(Vec3(std::cos(t), std::sin(t), 0.0)));
  }
  return {g, pts};
}

RodState straight_rod(const Grid& g, const Vec3& dir) {
  RodState s{g, {}, {}, {}};
  const UnitVec3 v = UnitVec3::normalized(dir);
  for (int i = 0; i < g.n_nodes(); ++i) {
    s.y.push_back(g.node(i) * v.coords());
    s.v.push_back(v);
  }
  s.lambda.assign(static_cast<std::size_t>(g.n_intervals()), Vec3::Zero());
  return s;
}

RodBoundary boundary_of(const RodState& s) { return {s.y.front(), s.y.back(), s.v.front(), s.v.back()}; }

}  // namespace

TEST_CASE("winding force values") {
  CHECK(winding_force(Vec3(1, 0, 0)).coeffs.norm() == 0.0);
  const Vec3 w = winding_force(Vec3(1.0, 0.0, 1.0) / std::sqrt(2.0)).coeffs;
  CHECK((w - Vec3(0.0, 3.0, 0.0)).norm() <= 1e-14);
  try {
    (void)winding_force(Vec3(0, 0, 1));
    FAIL("expected PoleSingularity");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PoleSingularity);
  }
  Rng rng(41);
  for (int k = 0; k < 1000; ++k) {
    const UnitVec3 y = oracles::random_unit(rng);
    if (y[0] * y[0] + y[1] * y[1] <= 1e-6) continue;
    CHECK(std::abs(winding_force(y)(y)) <= 1e-12 * (1.0 + winding_force(y).coeffs.norm()));
  }
}

TEST_CASE("winding force derivative") {
  Rng rng(42);
  for (int k = 0; k < 100; ++k) {
    const UnitVec3 y = oracles::random_unit(rng);
    if (y[0] * y[0] + y[1] * y[1] <= 1e-2) continue;
    const Vec3 dy = oracles::random_tangent(rng, y);
    const double s = 1e-5;
    const Vec3 fd = (winding_force(y.coords() + s * dy).coeffs - winding_force(y.coords() - s * dy).coeffs) / (2 * s);
    const Vec3 exact = winding_force_deriv(y, dy).coeffs;
    CHECK((fd - exact).norm() <= 1e-6 * std::max(1.0, exact.norm()));
  }
}

TEST_CASE("geodesic residual") {
  const Grid g(1.0, 30);
  // Equally spaced great-circle nodes are a discrete root without force.
  CHECK(geodesic_residual(equator_arc(g, 2.5), 0.0).lpNorm<Eigen::Infinity>() <= 1e-12);

  const UnitVec3 p = UnitVec3::normalized(Vec3(0.2, 0.5, 0.1));
  const NodalCurve constant{g, std::vector<UnitVec3>(static_cast<std::size_t>(g.n_nodes()), p)};
  CHECK(geodesic_residual(constant, 0.0).norm() == 0.0);

  Rng rng(43);
  const GeodesicForceProblem problem(g, default_geodesic_boundary(), 3.0);
  for (int k = 0; k < 10; ++k) {
    const NodalCurve c = oracles::perturb_curve(rng, problem.initial_curve(), 0.1);
    const auto want = nodal_oracle(c, [](const Vec3& y) { return winding_force(y, 3.0).coeffs; });
    CHECK((geodesic_residual(c, 3.0) - want).lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + want.lpNorm<Eigen::Infinity>()));
    CHECK((problem.residual(c) - want).lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + want.lpNorm<Eigen::Infinity>()));
    // Transport to itself changes nothing.
    CHECK((problem.transported_residual(c, c) - problem.residual(c)).norm() <= 1e-12);
  }
}

TEST_CASE("geodesic Newton matrix symmetry") {
  Rng rng(44);
  const Grid g(1.0, 20);
  const GeodesicForceProblem problem(g, default_geodesic_boundary(), 3.0);
  const NodalCurve c = oracles::perturb_curve(rng, problem.initial_curve(), 0.1);
  CHECK(rel_asym(geodesic_jacobian(c, 0.0).to_dense()) <= 1e-12);
  CHECK(rel_asym(geodesic_jacobian(c, 3.0).to_dense()) > 1e-8);
}

TEST_CASE("geodesic Newton matrix against finite differences") {
  Rng rng(45);
  const Grid g(1.0, 12);
  const GeodesicForceProblem problem(g, default_geodesic_boundary(), 3.0);
  for (int k = 0; k < 5; ++k) {
    const NodalCurve c = oracles::perturb_curve(rng, problem.initial_curve(), 0.1);
    const auto a = problem.jacobian(c);
    for (int d = 0; d < 5; ++d) {
      const Eigen::VectorXd dir = oracles::gaussian(rng, problem.dof_count(c));
      const Eigen::VectorXd fd = oracles::fd_transported(problem, c, dir, 1e-5);
      CHECK(oracles::rel_err(a.multiply(dir), fd) <= 1e-6);
    }
  }
}

TEST_CASE("antipodal boundary points are rejected") {
  CHECK_THROWS_AS(GeodesicForceProblem(Grid(1.0, 5), {UnitVec3::e3(), UnitVec3(-Vec3::UnitZ())}, 3.0), Error);
}

TEST_CASE("penalty function") {
  for (const double x : {-2.0, -1e-9, 0.0, 1e-9, 0.5, 3.0}) {
    CHECK(penalty_max(x) * penalty_max_newton_deriv(x) == penalty_max(x));
  }
  CHECK(penalty_max_newton_deriv(0.0) == 0.0);
}

TEST_CASE("obstacle residual and matrix") {
  const Grid g(1.0, 20);
  const BoundaryPoints bd = default_obstacle_boundary();
  const NodalCurve geo = fem1d::great_circle_curve(g, bd.gamma0, bd.gamma_t);
  double top = -1.0;
  for (const auto& y : geo.points) top = std::max(top, y[2]);

  SUBCASE("inactive cap") {
    const double h_ref = 0.5 * (1.0 - top);
    CHECK((obstacle_residual(geo, 7.0, h_ref) - geodesic_residual(geo, 0.0)).norm() == 0.0);
    CHECK((obstacle_jacobian(geo, 7.0, h_ref).to_dense() - geodesic_jacobian(geo, 0.0).to_dense()).norm() == 0.0);
  }
  SUBCASE("one active node") {
    int peak = 0;
    for (int i = 1; i <= g.n_interior(); ++i) {
      if (geo[i][2] > geo[peak][2]) peak = i;
    }
    double second = -1.0;
    for (int i = 0; i < g.n_nodes(); ++i) {
      if (i != peak) second = std::max(second, geo[i][2]);
    }
    const double delta = 0.5 * (top - second);
    const double h_ref = 1.0 - top + delta;  // only the peak node exceeds 1 - h_ref, by delta
    const double p = 3.0;
    const Eigen::VectorXd diff = obstacle_residual(geo, p, h_ref) - geodesic_residual(geo, 0.0);
    const auto basis = geometry::tangent_basis(geo[peak]);
    for (int i = 1; i <= g.n_interior(); ++i) {
      for (int j = 0; j < 2; ++j) {
        const double want = i == peak ? g.h() * p * delta * basis[j][2] : 0.0;
        CHECK(diff[2 * (i - 1) + j] == doctest::Approx(want).epsilon(1e-12).scale(1e-15));
      }
    }
    const Eigen::VectorXd diff2 = obstacle_residual(geo, 2.0 * p, h_ref) - geodesic_residual(geo, 0.0);
    CHECK((diff2 - 2.0 * diff).norm() <= 1e-14);
  }
  SUBCASE("fully active") {
    const double h_ref = 1.0 - geo[0][2] + 0.5;  // every node in the cap
    const double p = 2.0;
    const Eigen::MatrixXd diff = obstacle_jacobian(geo, p, h_ref).to_dense() - geodesic_jacobian(geo, 0.0).to_dense();
    for (int i = 1; i <= g.n_interior(); ++i) {
      const auto basis = geometry::tangent_basis(geo[i]);
      const double excess = geo[i][2] - 1.0 + h_ref;
      for (int k = 0; k < 2; ++k) {
        for (int l = 0; l < 2; ++l) {
          // Penalty derivative plus the penalty force in the connection term.
          const double want = g.h() * p * (basis[l][2] * basis[k][2] - excess * geo[i][2] * basis[l].dot(basis[k]));
          CHECK(diff(2 * (i - 1) + k, 2 * (i - 1) + l) == doctest::Approx(want).epsilon(1e-12).scale(1e-14));
        }
      }
    }
  }
}

TEST_CASE("obstacle matrix against finite differences away from the kink") {
  Rng rng(46);
  const Grid g(1.0, 12);
  ObstacleProblem problem(g, default_obstacle_boundary(), {0.1, 10.0, 1.2, 1e-3, 500});
  int checked = 0;
  for (int k = 0; k < 5; ++k) {
    const NodalCurve c = oracles::perturb_curve(rng, problem.initial_curve(), 0.05);
    const auto a = problem.jacobian(c);
    for (int d = 0; d < 5; ++d) {
      const Eigen::VectorXd dir = oracles::gaussian(rng, problem.dof_count(c));
      const double step = 1e-5;
      const NodalCurve plus = problem.retract(c, dir, step);
      const NodalCurve minus = problem.retract(c, dir, -step);
      bool crosses = false;
      for (int i = 1; i <= g.n_interior(); ++i) {
        const double gap = 1.0 - 0.1;
        const double s0 = c[i][2] - gap, s1 = plus[i][2] - gap, s2 = minus[i][2] - gap;
        crosses = crosses || std::abs(s0) <= 1e-8 || (s1 > 0) != (s0 > 0) || (s2 > 0) != (s0 > 0);
      }
      if (crosses) continue;
      ++checked;
      CHECK(oracles::rel_err(a.multiply(dir), oracles::fd_transported(problem, c, dir, step)) <= 1e-6);
    }
  }
  CHECK(checked >= 15);
}

TEST_CASE("obstacle setup is validated") {
  const Grid g(1.0, 5);
  CHECK_THROWS_AS(ObstacleProblem(g, default_obstacle_boundary(), {1.5, 1.0, 1.2, 1e-3, 10}), Error);
  CHECK_THROWS_AS(ObstacleProblem(g, default_obstacle_boundary(), {0.1, 1.0, 0.9, 1e-3, 10}), Error);
  // Boundary point inside the cap.
  CHECK_THROWS_AS(ObstacleProblem(g, default_geodesic_boundary(), {0.1, 1.0, 1.2, 1e-3, 10}), Error);
}

TEST_CASE("path-following") {
  const Grid g(1.0, 100);
  SUBCASE("cap above the geodesic needs no stage") {
    ObstacleProblem problem(g, default_obstacle_boundary(), {0.02, 1.0, 1.2, 1e-3, 500});
    const auto result = obstacle_path_follow(problem, problem.initial_curve(), newton::NewtonConfig{});
    CHECK(result.stages.empty());
    CHECK(result.status == newton::Termination::Converged);
  }
  for (const double h_ref : {0.1, 0.2}) {
    CAPTURE(h_ref);
    ObstacleProblem problem(g, default_obstacle_boundary(), {h_ref, 1.0, 1.2, 1e-3, 500});
    const auto result = obstacle_path_follow(problem, problem.initial_curve(), newton::NewtonConfig{});
    REQUIRE(result.status == newton::Termination::Converged);
    double top = -1.0;
    for (const auto& y : result.curve.points) top = std::max(top, y[2]);
    CHECK(top >= 1.0 - h_ref - 1e-3);
    CHECK(top <= 1.0 - h_ref + 1e-3);
    for (std::size_t s = 1; s < result.stages.size(); ++s) {
      CHECK(result.stages[s].violation <= result.stages[s - 1].violation);
      CHECK(result.stages[s].p == doctest::Approx(1.2 * result.stages[s - 1].p));
    }
  }
}

TEST_CASE("rod layout") {
  const RodLayout layout{4};
  CHECK(layout.size() == 35);
  CHECK(layout.lambda(0) == 0);
  CHECK(layout.y(1) == 3);
  CHECK(layout.v(1) == 6);
  CHECK(layout.lambda(1) == 8);
  CHECK(layout.lambda(4) == 32);
  CHECK(layout.y(0) == -1);
  CHECK(layout.v(5) == -1);
}

TEST_CASE("rod initial guess") {
  const Grid g(1.0, 100);
  const RodState s = rod_initial_guess(g, default_rod_boundary());
  for (const auto& v : s.v) CHECK(std::abs(v.coords().norm() - 1.0) <= 1e-12);
  CHECK((s.v.front().coords() - Vec3(1, 0, 2) / std::sqrt(5.0)).norm() <= 1e-15);
  CHECK((s.y.back() - Vec3(0.8, 0, 0)).norm() == 0.0);

  const RodState one = rod_initial_guess(Grid(1.0, 1), default_rod_boundary());
  const RodBoundary bd = default_rod_boundary();
  CHECK((one.v[1].coords() - (bd.v_a.coords() + bd.v_b.coords()).normalized()).norm() <= 1e-15);

  RodBoundary same = bd;
  same.v_b = same.v_a;
  const RodState c = rod_initial_guess(Grid(1.0, 7), same);
  for (const auto& v : c.v) CHECK((v.coords() - bd.v_a.coords()).norm() <= 1e-15);

  RodBoundary opposite = bd;
  opposite.v_b = UnitVec3(-bd.v_a.coords());
  CHECK_THROWS_AS(rod_initial_guess(Grid(1.0, 1), opposite), Error);
}

TEST_CASE("rod residual structure") {
  const Grid g(1.0, 9);
  const RodState straight = straight_rod(g, Vec3(1.0, 2.0, -0.5));
  CHECK(rod_residual(straight, {1.0}, {}).lpNorm<Eigen::Infinity>() <= 1e-12);

  Rng rng(47);
  const RodState s = oracles::perturb_rod(rng, rod_initial_guess(g, default_rod_boundary()), 0.1, 1.0);
  const RodLayout layout{g.n_interior()};
  const Eigen::VectorXd r = rod_residual(s, {1.0}, {});
  const double h = g.h();
  for (int e = 0; e < g.n_intervals(); ++e) {
    const auto ue = static_cast<std::size_t>(e);
    const Vec3 want = h * ((s.y[ue + 1] - s.y[ue]) / h - 0.5 * (s.v[ue].coords() + s.v[ue + 1].coords()));
    CHECK((r.segment(layout.lambda(e), 3) - want).norm() <= 1e-14);
  }
  double worst = 0.0;
  for (int e = 0; e < g.n_intervals(); ++e) worst = std::max(worst, r.segment(layout.lambda(e), 3).lpNorm<Eigen::Infinity>() / h);
  CHECK(rod_constraint_violation(s) == doctest::Approx(worst).epsilon(1e-12));

  // The multiplier enters linearly and only in the y and v rows.
  RodState shifted = s;
  for (auto& l : shifted.lambda) l += Vec3(0.3, -0.1, 0.2);
  RodState shifted2 = s;
  for (auto& l : shifted2.lambda) l += 2.0 * Vec3(0.3, -0.1, 0.2);
  const Eigen::VectorXd d1 = rod_residual(shifted, {1.0}, {}) - r;
  const Eigen::VectorXd d2 = rod_residual(shifted2, {1.0}, {}) - r;
  CHECK((d2 - 2.0 * d1).norm() <= 1e-12);
  for (int e = 0; e < g.n_intervals(); ++e) CHECK(d1.segment(layout.lambda(e), 3).norm() == 0.0);
  // A constant shift cancels in the interior y rows.
  for (int i = 1; i <= g.n_interior(); ++i) CHECK(d1.segment(layout.y(i), 3).norm() <= 1e-14);
}

TEST_CASE("rod Newton matrix structure") {
  const Grid g(1.0, 6);
  const RodState straight = straight_rod(g, Vec3(0.0, 1.0, 1.0));
  const RodLayout layout{g.n_interior()};
  const Eigen::MatrixXd a = rod_jacobian(straight, {1.0}, {}).to_dense();
  const double h = g.h();
  for (int i = 1; i <= g.n_interior(); ++i) {
    for (int k = 1; k <= g.n_interior(); ++k) {
      CHECK(a.block(layout.y(i), layout.y(k), 3, 3).norm() == 0.0);
      const Eigen::MatrixXd vv = a.block(layout.v(i), layout.v(k), 2, 2);
      const double want = i == k ? 2.0 / h : (std::abs(i - k) == 1 ? -1.0 / h : 0.0);
      CHECK((vv - want * Eigen::MatrixXd::Identity(2, 2)).norm() <= 1e-12 / h);
    }
  }
  Rng rng(48);
  const RodState s = oracles::perturb_rod(rng, rod_initial_guess(g, default_rod_boundary()), 0.1, 1.0);
  CHECK(rod_jacobian(s, {1.0}, {}).lower_bw() <= RodLayout::kBandwidth);
}

TEST_CASE("rod Newton matrix against finite differences") {
  Rng rng(49);
  const Grid g(1.0, 8);
  const RodProblem problem(g, default_rod_boundary(), {1.0, 2.0, 1.5, 1.0, 0.7, 1.0, 1.2, 3.0, 1.0});
  for (int k = 0; k < 5; ++k) {
    const RodState s = oracles::perturb_rod(rng, problem.initial_guess(), 0.1, 2.0);
    const auto a = problem.jacobian(s);
    for (int d = 0; d < 5; ++d) {
      const Eigen::VectorXd dir = oracles::gaussian(rng, problem.dof_count(s));
      CHECK(oracles::rel_err(a.multiply(dir), oracles::fd_transported(problem, s, dir, 1e-5)) <= 1e-6);
    }
  }
}

TEST_CASE("rod with a force field") {
  // Gravity-like constant load plus a linear spring towards the origin.
  RodForce force{[](const Vec3& y) { return Vec3(Vec3(0.0, 0.0, 1.0) + 0.5 * y); },
                 [](const Vec3&, const Vec3& dy) { return Vec3(0.5 * dy); }};
  Rng rng(50);
  const Grid g(1.0, 8);
  const RodProblem problem(g, default_rod_boundary(), {1.0}, force);
  const RodState s = oracles::perturb_rod(rng, problem.initial_guess(), 0.1, 1.0);
  const auto a = problem.jacobian(s);
  for (int d = 0; d < 5; ++d) {
    const Eigen::VectorXd dir = oracles::gaussian(rng, problem.dof_count(s));
    CHECK(oracles::rel_err(a.multiply(dir), oracles::fd_transported(problem, s, dir, 1e-5)) <= 1e-6);
  }
  const auto result = newton::damped_newton(problem, problem.initial_guess(), newton::NewtonConfig{});
  CHECK(result.trace.terminated == newton::Termination::Converged);
}

TEST_CASE("rod solve") {
  const Grid g(1.0, 40);
  const RodProblem problem(g, default_rod_boundary());
  const auto result = newton::damped_newton(problem, problem.initial_guess(), newton::NewtonConfig{});
  REQUIRE(result.trace.terminated == newton::Termination::Converged);
  CHECK(rod_constraint_violation(result.state) <= 1e-8);
  for (const auto& v : result.state.v) CHECK(std::abs(v.coords().norm() - 1.0) <= 1e-12);
  const RodBoundary bd = default_rod_boundary();
  CHECK(result.state.y.front() == bd.y_a);
  CHECK(result.state.y.back() == bd.y_b);
  // Restarting from the equilibrium accepts it after one step.
  const auto again = newton::damped_newton(problem, result.state, newton::NewtonConfig{});
  CHECK(again.trace.terminated == newton::Termination::Converged);
  CHECK(again.trace.iterations.size() == 1);
}

TEST_CASE("taut straight rod has an undetermined tension") {
  // Endpoints one rod length apart: a constant axial multiplier is invisible.
  const Grid g(1.0, 20);
  const RodState straight = straight_rod(g, Vec3(1.0, 1.0, 0.0));
  const RodProblem problem(g, boundary_of(straight));
  const RodLayout layout{g.n_interior()};
  Eigen::VectorXd mode = Eigen::VectorXd::Zero(problem.dof_count(straight));
  for (int e = 0; e < g.n_intervals(); ++e) mode.segment(layout.lambda(e), 3) = straight.v.front().coords();
  const Eigen::MatrixXd a = problem.jacobian(straight).to_dense();
  CHECK((a.transpose() * mode).norm() <= 1e-12 * a.norm());
}
