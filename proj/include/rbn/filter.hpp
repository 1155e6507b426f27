#pragma once

#include "rbn/systems.hpp"
#include "rbn/value_provider.hpp"

namespace rbn {

struct FilterResult {
  VectorXd control;
  bool constraint_active = false;  // the nominal input had to be modified
  bool feasible = true;
  double barrier_value = 0.0;
  double constraint_slack = 0.0;   // a . u - b; >= 0 when feasible
};

// Exact solution of  min ||u - u_nom||^2  s.t.  a . u >= b,  u in box.
// Active-set clipping with re-projection; at most dim(u) passes. When no box
// point satisfies the constraint the result maximizes a . u, free channels
// staying at the (clamped) nominal.
FilterResult solve_box_qp(const VectorXd& a, double b, const VectorXd& u_nom,
                          const ControlBounds& bounds);

// CBF-QP safety filter: min ||u - u_nom||^2 s.t. grad V . f(x, u) >= -gamma V.
// Control-affine dynamics make the constraint linear in u.
FilterResult qp_filter(const ValueFn& value, const SystemModel& sys, const VectorXd& x,
                       double tau, double gamma, const VectorXd& u_nom);

// Switching baseline: nominal while V > threshold, otherwise the optimal safe
// control argmax_u grad V . f(x, u). Equality switches to the safe control.
FilterResult least_restrictive(const ValueFn& value, const SystemModel& sys, const VectorXd& x,
                               double tau, double gamma, const VectorXd& u_nom, double threshold);

}  // namespace rbn
