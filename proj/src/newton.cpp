#include "bundle_newton/newton.hpp"

#include <algorithm>
#include <sstream>

namespace bundle_newton::newton {

void NewtonConfig::validate() const {
  std::ostringstream msg;
  if (!(tol > 0.0)) {
    msg << "tol must be positive";
  } else if (is_undamped()) {
    if (!(theta_des > 0.0)) msg << "theta_des must be positive";
  } else if (!(0.0 < theta_des && theta_des < theta_acc && theta_acc < 1.0)) {
    msg << "need 0 < theta_des < theta_acc < 1 (got " << theta_des << ", " << theta_acc << ")";
  }
  if (msg.tellp() == 0 && !(0.0 < alpha_fail && alpha_fail < alpha0 && alpha0 <= 1.0)) {
    msg << "need 0 < alpha_fail < alpha0 <= 1 (got " << alpha_fail << ", " << alpha0 << ")";
  }
  if (msg.tellp() == 0 && (max_outer < 1 || max_inner < 1)) {
    msg << "iteration limits must be positive";
  }
  if (msg.tellp() != 0) {
    throw Error(ErrorKind::InvalidArgument, msg.str());
  }
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "Converged";
    case Termination::DampingFailed: return "DampingFailed";
    case Termination::MaxIterations: return "MaxIterations";
  }
  return "Unknown";
}

VectorXd simplified_rhs(const VectorXd& r_transported, const VectorXd& r_old, double alpha) {
  if (r_transported.size() != r_old.size()) {
    throw Error(ErrorKind::DimensionMismatch, "residual lengths differ");
  }
  return r_transported - (1.0 - alpha) * r_old;
}

double compute_theta(double norm_dx_bar, double norm_dx_scaled) {
  if (norm_dx_scaled == 0.0) {
    throw Error(ErrorKind::ZeroStep, "damped Newton step has zero norm");
  }
  return norm_dx_bar / norm_dx_scaled;
}

double update_alpha(double alpha, double theta, double theta_des) {
  return std::min(1.0, alpha * theta_des / theta);
}

double norm_inf_nodal(const VectorXd& xi, const std::vector<geometry::TangentBasis>& bases) {
  if (xi.size() != 2 * static_cast<Eigen::Index>(bases.size())) {
    throw Error(ErrorKind::DimensionMismatch, "coefficient vector does not match the bases");
  }
  double out = 0.0;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(2 * i);
    out = std::max(out, bases[i].combine(xi(k), xi(k + 1)).norm());
  }
  return out;
}

}  // namespace bundle_newton::newton
