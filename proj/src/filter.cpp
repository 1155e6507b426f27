#include "rbn/filter.hpp"

#include <cmath>
#include <stdexcept>

namespace rbn {

FilterResult solve_box_qp(const VectorXd& a, double b, const VectorXd& u_nom,
                          const ControlBounds& bounds) {
  const int dim = static_cast<int>(a.size());
  if (u_nom.size() != dim || bounds.dim() != dim)
    throw std::invalid_argument("solve_box_qp: dimension mismatch");
  if (!u_nom.allFinite()) throw std::invalid_argument("solve_box_qp: non-finite nominal");

  FilterResult r;
  r.control = bounds.clamp(u_nom);
  const double slack0 = a.dot(r.control) - b;
  if (slack0 >= 0.0) {
    r.constraint_slack = slack0;
    return r;
  }
  r.constraint_active = true;

  double max_au = 0.0;
  for (int i = 0; i < dim; ++i)
    max_au += std::max(a(i) * bounds.lower(i), a(i) * bounds.upper(i));
  if (max_au < b) {
    // No box point satisfies the constraint; take the least-unsafe input.
    for (int i = 0; i < dim; ++i) {
      if (a(i) > 0.0)
        r.control(i) = bounds.upper(i);
      else if (a(i) < 0.0)
        r.control(i) = bounds.lower(i);
    }
    r.feasible = false;
    r.constraint_slack = max_au - b;
    return r;
  }

  // KKT form u_i = clamp(u_nom_i + lambda a_i); grow the clipped set until the
  // free channels meet the constraint exactly.
  const VectorXd un = r.control;
  std::vector<bool> clipped(dim, false);
  VectorXd u = un;
  for (int pass = 0; pass <= dim; ++pass) {
    double denom = 0.0, need = b;
    for (int i = 0; i < dim; ++i) {
      if (clipped[i])
        need -= a(i) * u(i);
      else {
        denom += a(i) * a(i);
        need -= a(i) * un(i);
      }
    }
    if (denom == 0.0) break;
    const double lambda = need / denom;
    bool any_violation = false;
    for (int i = 0; i < dim; ++i) {
      if (clipped[i]) continue;
      const double ui = un(i) + lambda * a(i);
      if (ui < bounds.lower(i)) {
        u(i) = bounds.lower(i);
        clipped[i] = true;
        any_violation = true;
      } else if (ui > bounds.upper(i)) {
        u(i) = bounds.upper(i);
        clipped[i] = true;
        any_violation = true;
      } else {
        u(i) = ui;
      }
    }
    if (!any_violation) break;
  }
  r.control = u;
  r.constraint_slack = a.dot(u) - b;
  return r;
}

FilterResult qp_filter(const ValueFn& value, const SystemModel& sys, const VectorXd& x,
                       double tau, double gamma, const VectorXd& u_nom) {
  const ValuePoint v = value(x, tau, gamma);
  VectorXd drift;
  MatrixXd G;
  control_affine(sys, x, drift, G);
  const VectorXd a = G.transpose() * v.grad_x;
  const double b = -gamma * v.value - v.grad_x.dot(drift);
  FilterResult r = solve_box_qp(a, b, u_nom, sys.bounds);
  r.barrier_value = v.value;
  return r;
}

FilterResult least_restrictive(const ValueFn& value, const SystemModel& sys, const VectorXd& x,
                               double tau, double gamma, const VectorXd& u_nom, double threshold) {
  if (threshold < 0.0) throw std::invalid_argument("least_restrictive: threshold must be >= 0");
  const ValuePoint v = value(x, tau, gamma);
  FilterResult r;
  r.barrier_value = v.value;
  if (v.value > threshold) {
    r.control = sys.bounds.clamp(u_nom);
  } else {
    r.control = optimal_control(sys, x, v.grad_x);
    r.constraint_active = true;
  }
  return r;
}

}  // namespace rbn
