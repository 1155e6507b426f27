#include "rbn/value_provider.hpp"

#include <algorithm>

namespace rbn {

namespace {

VectorXd clamp_to_domain(const SystemModel& sys, const VectorXd& x) {
  VectorXd y = x;
  for (int d = 0; d < sys.state_dim; ++d)
    if (!sys.is_periodic(d)) y(d) = std::clamp(y(d), sys.domain_lo(d), sys.domain_hi(d));
  return y;
}

}  // namespace

ValueFn make_value_fn(const GridValue& gv) {
  return [gv](const VectorXd& x, double, double) -> ValuePoint {
    const GridQuery q = query(gv, clamp_to_grid(gv.grid, x));
    return {q.value, q.gradient};
  };
}

ValueFn make_value_fn(const ValueNet& net) {
  return [net](const VectorXd& x, double tau, double gamma) -> ValuePoint {
    const ValueGradient g = input_gradient(net, clamp_to_domain(net.system, x), tau, gamma);
    return {g.value, g.dx};
  };
}

BatchValueFn make_batch_value_fn(const GridValue& gv) {
  return [gv](const MatrixXd& X, double, double) {
    VectorXd out(X.cols());
    for (int j = 0; j < X.cols(); ++j) out(j) = query(gv, clamp_to_grid(gv.grid, X.col(j))).value;
    return out;
  };
}

BatchValueFn make_batch_value_fn(const ValueNet& net) {
  return [net](const MatrixXd& X, double tau, double gamma) {
    MatrixXd Xc(X.rows(), X.cols());
    for (int j = 0; j < X.cols(); ++j) Xc.col(j) = clamp_to_domain(net.system, X.col(j));
    const int n = static_cast<int>(X.cols());
    return batch_value(net, Xc, VectorXd::Constant(n, tau), VectorXd::Constant(n, gamma));
  };
}

BatchGradFn make_batch_grad_fn(const GridValue& gv) {
  return [gv](const MatrixXd& X, double, double) {
    BatchEval out;
    out.value.resize(X.cols());
    out.grad_x.resize(X.rows(), X.cols());
    for (int j = 0; j < X.cols(); ++j) {
      const GridQuery q = query(gv, clamp_to_grid(gv.grid, X.col(j)));
      out.value(j) = q.value;
      out.grad_x.col(j) = q.gradient;
    }
    return out;
  };
}

BatchGradFn make_batch_grad_fn(const ValueNet& net) {
  return [net](const MatrixXd& X, double tau, double gamma) {
    MatrixXd Xc(X.rows(), X.cols());
    for (int j = 0; j < X.cols(); ++j) Xc.col(j) = clamp_to_domain(net.system, X.col(j));
    const int n = static_cast<int>(X.cols());
    const BatchValueGradient g =
        batch_value_gradient(net, Xc, VectorXd::Constant(n, tau), VectorXd::Constant(n, gamma));
    return BatchEval{g.value, g.dx};
  };
}

ValueFn shift_value_fn(ValueFn f, double delta) {
  return [f = std::move(f), delta](const VectorXd& x, double tau, double gamma) {
    ValuePoint p = f(x, tau, gamma);
    p.value -= delta;
    return p;
  };
}

BatchValueFn shift_batch_value_fn(BatchValueFn f, double delta) {
  return [f = std::move(f), delta](const MatrixXd& X, double tau, double gamma) {
    VectorXd v = f(X, tau, gamma);
    v.array() -= delta;
    return v;
  };
}

BatchGradFn shift_batch_grad_fn(BatchGradFn f, double delta) {
  return [f = std::move(f), delta](const MatrixXd& X, double tau, double gamma) {
    BatchEval e = f(X, tau, gamma);
    e.value.array() -= delta;
    return e;
  };
}

}  // namespace rbn
