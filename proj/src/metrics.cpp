#include "rbn/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "rbn/filter.hpp"
#include "rbn/random.hpp"
#include "rbn/simulator.hpp"

namespace rbn {

SetComparison compare_sets(const BatchValueFn& truth, const BatchValueFn& learned,
                           const MatrixXd& points, double tau, double gamma, double level) {
  const std::int64_t n = points.cols();
  if (n == 0) throw std::invalid_argument("compare_sets: no sample points");
  const VectorXd vt = truth(points, tau, gamma);
  const VectorXd vl = learned(points, tau, gamma);

  std::int64_t both = 0, only_t = 0, only_l = 0;
  for (std::int64_t j = 0; j < n; ++j) {
    const bool in_t = vt(j) > level;
    const bool in_l = vl(j) > level;
    both += in_t && in_l;
    only_t += in_t && !in_l;
    only_l += !in_t && in_l;
  }
  SetComparison sc;
  sc.n_points = n;
  sc.fi = double(only_l) / n;
  sc.fe = double(only_t) / n;
  const std::int64_t uni = both + only_t + only_l;
  if (uni == 0) {
    sc.iou = 1.0;
    sc.degenerate = true;
  } else {
    sc.iou = double(both) / uni;
  }
  return sc;
}

namespace {

// Goal-seeking nominal control for rollout evaluation: each unicycle agent
// steers toward a per-rollout goal; other systems use a zero nominal.
VectorXd rollout_nominal(const SystemModel& sys, const VectorXd& x, const MatrixXd& goals, int j) {
  VectorXd u = VectorXd::Zero(sys.control_dim);
  if (sys.kind == SystemKind::Dubins3D) {
    u(0) = nominal_control(x, goals.col(j).head<2>(), sys.bounds);
  } else if (sys.kind == SystemKind::MultiVehicle9D) {
    for (int a = 0; a < 3; ++a)
      u(a) = nominal_control(x.segment<3>(3 * a), goals.col(j).segment<2>(2 * a), sys.bounds);
  }
  return u;
}

}  // namespace

RolloutClassification classify_rollouts(const SystemModel& sys, const BatchGradFn& value,
                                        double t_f, RolloutPolicyKind policy, int n,
                                        double horizon, double dt, double gamma, double delta,
                                        std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("classify_rollouts: n must be >= 1");
  std::mt19937_64 rng = substream(seed, "metrics.init");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MatrixXd X(sys.state_dim, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < sys.state_dim; ++i)
      X(i, j) = sys.domain_lo(i) + (sys.domain_hi(i) - sys.domain_lo(i)) * unit(rng);

  const VectorXd predicted = value(X, t_f, gamma).value;

  // Per-rollout goals for the nominal controller (xy per agent).
  MatrixXd goals;
  if (policy == RolloutPolicyKind::QpFilteredNominal) {
    const int n_goal_xy = sys.kind == SystemKind::MultiVehicle9D ? 6 : 2;
    std::mt19937_64 grng = substream(seed, "metrics.goals");
    goals.resize(n_goal_xy, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n_goal_xy; ++i) {
        const int d = sys.kind == SystemKind::MultiVehicle9D ? 3 * (i / 2) + (i % 2) : i % 2;
        goals(i, j) = sys.domain_lo(d) + (sys.domain_hi(d) - sys.domain_lo(d)) * unit(grng);
      }
  }

  VectorXd min_cost(n);
  for (int j = 0; j < n; ++j) min_cost(j) = boundary(sys, X.col(j));

  const int steps = static_cast<int>(std::floor(horizon / dt + 1e-9));
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    if (policy == RolloutPolicyKind::LearnedOptimal) {
      const double tau = std::clamp(t_f - t, 0.0, t_f);
      const BatchEval e = value(X, tau, gamma);
      const HamiltonianBatch hb = batch_hamiltonian(sys, X, e.grad_x);
      for (int j = 0; j < n; ++j) {
        X.col(j) = rk4_step(sys, X.col(j), hb.u_opt.col(j), dt);
        min_cost(j) = std::min(min_cost(j), boundary(sys, X.col(j)));
      }
    } else {
      // The online filter evaluates the most-converged slice tau = t_f.
      const BatchEval e = value(X, t_f, gamma);
      for (int j = 0; j < n; ++j) {
        VectorXd drift;
        MatrixXd G;
        control_affine(sys, X.col(j), drift, G);
        const VectorXd a = G.transpose() * e.grad_x.col(j);
        const double b = -gamma * (e.value(j) - delta) - e.grad_x.col(j).dot(drift);
        const FilterResult fr = solve_box_qp(a, b, rollout_nominal(sys, X.col(j), goals, j), sys.bounds);
        X.col(j) = rk4_step(sys, X.col(j), fr.control, dt);
        min_cost(j) = std::min(min_cost(j), boundary(sys, X.col(j)));
      }
    }
  }

  int fp = 0, fn = 0;
  for (int j = 0; j < n; ++j) {
    const bool safe_pred = predicted(j) - delta >= 0.0;
    const bool collided = min_cost(j) < 0.0;
    fp += safe_pred && collided;
    fn += !safe_pred && !collided;
  }
  RolloutClassification rc;
  rc.n = n;
  rc.fpr = double(fp) / n;
  rc.fnr = double(fn) / n;
  rc.cc = 1.0 - rc.fpr - rc.fnr;
  return rc;
}

}  // namespace rbn
