#pragma once

#include <functional>

#include "rbn/grid.hpp"
#include "rbn/network.hpp"

namespace rbn {

// One value-provider surface for grid-backed and net-backed values. Queries
// outside the provider's domain are clamped to the boundary on non-periodic
// dimensions. Grid providers carry a single time slice and ignore the tau
// and gamma arguments.
struct ValuePoint {
  double value;
  VectorXd grad_x;
};
using ValueFn = std::function<ValuePoint(const VectorXd& x, double tau, double gamma)>;

// Batched values (columns of X), no gradients.
using BatchValueFn = std::function<VectorXd(const MatrixXd& X, double tau, double gamma)>;

// Batched values with spatial gradients.
struct BatchEval {
  VectorXd value;
  MatrixXd grad_x;
};
using BatchGradFn = std::function<BatchEval(const MatrixXd& X, double tau, double gamma)>;

ValueFn make_value_fn(const GridValue& gv);
ValueFn make_value_fn(const ValueNet& net);
BatchValueFn make_batch_value_fn(const GridValue& gv);
BatchValueFn make_batch_value_fn(const ValueNet& net);
BatchGradFn make_batch_grad_fn(const GridValue& gv);
BatchGradFn make_batch_grad_fn(const ValueNet& net);

// V - delta with gradients unchanged.
ValueFn shift_value_fn(ValueFn f, double delta);
BatchValueFn shift_batch_value_fn(BatchValueFn f, double delta);
BatchGradFn shift_batch_grad_fn(BatchGradFn f, double delta);

}  // namespace rbn
