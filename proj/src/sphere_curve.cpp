#include "bundle_newton/sphere_curve.hpp"

namespace bundle_newton::problems {

std::vector<TangentBasis> curve_bases(const NodalCurve& curve) {
  std::vector<TangentBasis> out;
  out.reserve(curve.points.size());
  for (const auto& y : curve.points) {
    out.push_back(geometry::tangent_basis(y));
  }
  return out;
}

std::vector<TangentBasis> interior_bases(const NodalCurve& curve) {
  std::vector<TangentBasis> out;
  out.reserve(static_cast<std::size_t>(curve.grid.n_interior()));
  for (int i = 1; i <= curve.grid.n_interior(); ++i) {
    out.push_back(geometry::tangent_basis(curve[i]));
  }
  return out;
}

NodalTests own_tests(const NodalCurve& curve) {
  NodalTests tests;
  tests.reserve(curve.points.size());
  for (const auto& y : curve.points) {
    const TangentBasis basis = geometry::tangent_basis(y);
    tests.push_back({basis.v1, basis.v2});
  }
  return tests;
}

NodalTests transported_tests(const NodalCurve& from, const NodalCurve& to) {
  if (from.points.size() != to.points.size()) {
    throw Error(ErrorKind::DimensionMismatch, "curves live on different grids");
  }
  NodalTests tests;
  tests.reserve(from.points.size());
  for (std::size_t i = 0; i < from.points.size(); ++i) {
    const TangentBasis basis = geometry::tangent_basis(from.points[i]);
    tests.push_back({geometry::transport_vector(from.points[i], to.points[i], basis.v1),
                     geometry::transport_vector(from.points[i], to.points[i], basis.v2)});
  }
  return tests;
}

NodalCurve retract_curve(const NodalCurve& curve, const VectorXd& xi, double alpha) {
  const int n = curve.grid.n_interior();
  if (xi.size() != kSphereDofsPerNode * n) {
    throw Error(ErrorKind::DimensionMismatch, "direction does not match the curve");
  }
  std::vector<UnitVec3> pts = curve.points;
  for (int i = 1; i <= n; ++i) {
    const TangentBasis basis = geometry::tangent_basis(curve[i]);
    const Index k = kSphereDofsPerNode * static_cast<Index>(i - 1);
    pts[static_cast<std::size_t>(i)] =
        geometry::retract_sphere(curve[i], alpha * basis.combine(xi(k), xi(k + 1)));
  }
  return NodalCurve(curve.grid, std::move(pts));
}

}  // namespace bundle_newton::problems
