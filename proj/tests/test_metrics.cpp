#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "rbn/metrics.hpp"
#include "rbn/value_provider.hpp"

using namespace rbn;

namespace {

BatchValueFn constant_fn(double c) {
  return [c](const MatrixXd& X, double, double) { return VectorXd::Constant(X.cols(), c); };
}

BatchValueFn table_fn(VectorXd vals) {
  // values indexed by column
  return [vals = std::move(vals)](const MatrixXd& X, double, double) {
    return vals.head(X.cols());
  };
}

}  // namespace

TEST_CASE("identical providers give IOU 1, FI 0, FE 0") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  VectorXd vals(50);
  for (int i = 0; i < 50; ++i) vals(i) = un(rng);
  const MatrixXd pts = MatrixXd::Random(2, 50);
  const SetComparison sc = compare_sets(table_fn(vals), table_fn(vals), pts, 1.0, 0.0);
  CHECK(sc.iou == 1.0);
  CHECK(sc.fi == 0.0);
  CHECK(sc.fe == 0.0);
  CHECK_FALSE(sc.degenerate);
}

TEST_CASE("empty learned set: IOU 0, FE is the truth fraction") {
  VectorXd truth(10);
  truth << 1, 1, 1, -1, -1, -1, -1, -1, -1, -1;
  const MatrixXd pts = MatrixXd::Random(2, 10);
  const SetComparison sc = compare_sets(table_fn(truth), constant_fn(-1.0), pts, 1.0, 0.0);
  CHECK(sc.iou == 0.0);
  CHECK(sc.fi == 0.0);
  CHECK(sc.fe == doctest::Approx(0.3));
}

TEST_CASE("hand-built ten-point example recomputed by enumeration") {
  VectorXd truth(10), learned(10);
  truth << 1, 1, 1, 1, -1, -1, -1, -1, -1, -1;    // 4 safe
  learned << 1, 1, 1, -1, 1, 1, -1, -1, -1, -1;   // misses #3, adds #4 #5
  const MatrixXd pts = MatrixXd::Random(2, 10);
  const SetComparison sc = compare_sets(table_fn(truth), table_fn(learned), pts, 1.0, 0.0);
  CHECK(sc.fi == doctest::Approx(0.2));
  CHECK(sc.fe == doctest::Approx(0.1));
  CHECK(sc.iou == doctest::Approx(3.0 / 6.0));
  CHECK(sc.n_points == 10);
}

TEST_CASE("degenerate empty union flags IOU 1") {
  const MatrixXd pts = MatrixXd::Random(2, 20);
  const SetComparison sc = compare_sets(constant_fn(-1.0), constant_fn(-2.0), pts, 1.0, 0.0);
  CHECK(sc.iou == 1.0);
  CHECK(sc.degenerate);
}

TEST_CASE("swapping providers swaps FI and FE, IOU unchanged") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  VectorXd a(200), b(200);
  for (int i = 0; i < 200; ++i) {
    a(i) = un(rng);
    b(i) = un(rng);
  }
  const MatrixXd pts = MatrixXd::Random(2, 200);
  const SetComparison ab = compare_sets(table_fn(a), table_fn(b), pts, 1.0, 0.0);
  const SetComparison ba = compare_sets(table_fn(b), table_fn(a), pts, 1.0, 0.0);
  CHECK(ab.iou == doctest::Approx(ba.iou));
  CHECK(ab.fi == doctest::Approx(ba.fe));
  CHECK(ab.fe == doctest::Approx(ba.fi));
}

TEST_CASE("level argument moves the decision boundary") {
  VectorXd truth(4), learned(4);
  truth << 0.5, 0.45, 0.3, 0.2;
  learned << 0.5, 0.35, 0.45, 0.2;
  const MatrixXd pts = MatrixXd::Random(2, 4);
  const SetComparison sc = compare_sets(table_fn(truth), table_fn(learned), pts, 1.0, 0.0, 0.4);
  CHECK(sc.fi == doctest::Approx(0.25));
  CHECK(sc.fe == doctest::Approx(0.25));
  CHECK(sc.iou == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("oracle value and policy on integrator1d classify perfectly") {
  // The exact avoid-tube value V(x, tau) = x with its optimal policy: states
  // with x >= 0 stay safe, states with x < 0 start in failure.
  SystemModel sys = make_system("integrator1d");
  const Grid g = Grid::regular(VectorXd::Constant(1, -2.0), VectorXd::Constant(1, 2.0),
                               Eigen::VectorXi::Constant(1, 201), {0});
  const GridValue v = solve(g, sys, 0.0, 1.0).back();
  const RolloutClassification rc =
      classify_rollouts(sys, make_batch_grad_fn(v), 1.0, RolloutPolicyKind::LearnedOptimal,
                        400, 1.0, 0.01, 0.0, 0.0, 5);
  CHECK(rc.fpr == 0.0);
  CHECK(rc.fnr == 0.0);
  CHECK(rc.cc == 1.0);
}

TEST_CASE("huge delta predicts everything unsafe: FPR 0, FNR = safe fraction") {
  SystemModel sys = make_system("integrator1d");
  const Grid g = Grid::regular(VectorXd::Constant(1, -2.0), VectorXd::Constant(1, 2.0),
                               Eigen::VectorXi::Constant(1, 201), {0});
  const GridValue v = solve(g, sys, 0.0, 1.0).back();
  const auto grad_fn = make_batch_grad_fn(v);

  const RolloutClassification big =
      classify_rollouts(sys, grad_fn, 1.0, RolloutPolicyKind::LearnedOptimal, 400, 1.0, 0.01,
                        0.0, 1e9, 5);
  CHECK(big.fpr == 0.0);
  CHECK(big.fnr > 0.3);  // roughly half the domain stays safe under the policy
  CHECK(big.cc == doctest::Approx(1.0 - big.fpr - big.fnr));
}

TEST_CASE("classification is deterministic and monotone in delta") {
  SystemModel sys = make_system("integrator1d");
  const Grid g = Grid::regular(VectorXd::Constant(1, -2.0), VectorXd::Constant(1, 2.0),
                               Eigen::VectorXi::Constant(1, 201), {0});
  const GridValue v = solve(g, sys, 0.0, 1.0).back();
  const auto grad_fn = make_batch_grad_fn(v);

  const auto at_delta = [&](double d) {
    return classify_rollouts(sys, grad_fn, 1.0, RolloutPolicyKind::LearnedOptimal, 300, 1.0,
                             0.01, 0.0, d, 42);
  };
  const RolloutClassification a = at_delta(0.05);
  const RolloutClassification b = at_delta(0.05);
  CHECK(a.fpr == b.fpr);
  CHECK(a.fnr == b.fnr);

  double prev_fpr = 1.0, prev_fnr = -1.0;
  for (double d : {-0.2, 0.0, 0.2, 0.5}) {
    const RolloutClassification rc = at_delta(d);
    CHECK(rc.fpr <= prev_fpr + 1e-12);
    CHECK(rc.fnr >= prev_fnr - 1e-12);
    prev_fpr = rc.fpr;
    prev_fnr = rc.fnr;
  }
}

TEST_CASE("qp-filtered rollouts run and respect bounds on dubins") {
  SystemModel sys = make_system("dubins3d");
  VectorXd lo(3), hi(3);
  lo << -1, -1, -M_PI;
  hi << 1, 1, M_PI;
  Eigen::VectorXi c(3);
  c << 31, 31, 21;
  const Grid g = Grid::regular(lo, hi, c, {0, 0, 1});
  const GridValue v = solve(g, sys, 0.0, 1.0).back();
  const RolloutClassification rc =
      classify_rollouts(sys, make_batch_grad_fn(v), 1.0, RolloutPolicyKind::QpFilteredNominal,
                        100, 1.0, 0.01, 0.0, 0.0, 9);
  CHECK(rc.n == 100);
  CHECK(rc.fpr >= 0.0);
  CHECK(rc.fnr >= 0.0);
  CHECK(rc.cc == doctest::Approx(1.0 - rc.fpr - rc.fnr));
  // the filter should keep most predicted-safe starts collision free
  CHECK(rc.fpr <= 0.1);
}
