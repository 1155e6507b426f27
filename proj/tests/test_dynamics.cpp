#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "rbn/systems.hpp"

using namespace rbn;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd x(v.size());
  int i = 0;
  for (double d : v) x(i++) = d;
  return x;
}

VectorXd random_in(const VectorXd& lo, const VectorXd& hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VectorXd x(lo.size());
  for (int i = 0; i < lo.size(); ++i) x(i) = lo(i) + (hi(i) - lo(i)) * u(rng);
  return x;
}

}  // namespace

TEST_CASE("dubins flow matches the model") {
  SystemModel sys = make_system("dubins3d");
  const VectorXd f1 = flow(sys, vec({0, 0, 0}), vec({1.0}));
  CHECK(f1(0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(f1(1) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(f1(2) == doctest::Approx(1.0).epsilon(1e-15));

  const VectorXd f2 = flow(sys, vec({0, 0, M_PI / 2}), vec({0.0}));
  CHECK(f2(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(f2(1) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(f2(2) == 0.0);

  CHECK_THROWS_AS(flow(sys, vec({0, 0}), vec({0.0})), std::invalid_argument);
}

TEST_CASE("multivehicle flow stacks three dubins flows") {
  SystemModel nine = make_system("multivehicle9d");
  SystemModel one = make_system("dubins3d");
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const VectorXd x = random_in(nine.domain_lo, nine.domain_hi, rng);
    const VectorXd u = random_in(nine.bounds.lower, nine.bounds.upper, rng);
    const VectorXd f = flow(nine, x, u);
    for (int a = 0; a < 3; ++a) {
      const VectorXd fa = flow(one, x.segment<3>(3 * a), u.segment<1>(a));
      CHECK((f.segment<3>(3 * a) - fa).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("boundary distances") {
  SystemModel nine = make_system("multivehicle9d");
  VectorXd x(9);
  x << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  CHECK(boundary(nine, x) == doctest::Approx(0.75).epsilon(1e-12));

  x << 0.3, -0.2, 1.0, 0.3, -0.2, -2.0, 5, 5, 0;
  CHECK(boundary(nine, x) == doctest::Approx(-0.25).epsilon(1e-12));

  SystemModel dub = make_system("dubins3d");
  for (double th : {0.0, 1.0, -2.0})
    CHECK(boundary(dub, vec({0.5, 0.0, th})) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("boundary is 1-lipschitz per position coordinate") {
  // Single-obstacle systems are 1-Lipschitz in the euclidean position norm;
  // the pairwise-min boundary moves at most 1 per unit of l1 position change.
  std::mt19937_64 rng(11);
  for (const char* name : {"dubins3d", "air3d", "multivehicle9d"}) {
    SystemModel sys = make_system(name);
    const bool pairwise = sys.kind == SystemKind::MultiVehicle9D;
    for (int trial = 0; trial < 200; ++trial) {
      VectorXd a = random_in(sys.domain_lo, sys.domain_hi, rng);
      VectorXd b = random_in(sys.domain_lo, sys.domain_hi, rng);
      for (int d : sys.periodic_dims) b(d) = a(d);  // only positions move
      const double dl = std::abs(boundary(sys, a) - boundary(sys, b));
      const double dist = pairwise ? (a - b).lpNorm<1>() : (a - b).norm();
      CHECK(dl <= dist + 1e-12);
    }
  }
}

TEST_CASE("hamiltonian closed form dominates sampled controls") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> un(-2.0, 2.0);
  for (const char* name : {"integrator1d", "dubins3d", "air3d", "multivehicle9d"}) {
    SystemModel sys = make_system(name);
    for (int trial = 0; trial < 20; ++trial) {
      const VectorXd x = random_in(sys.domain_lo, sys.domain_hi, rng);
      VectorXd p(sys.state_dim);
      for (int i = 0; i < p.size(); ++i) p(i) = un(rng);
      const double h = hamiltonian(sys, x, p);
      for (int k = 0; k < 500; ++k) {
        const VectorXd u = random_in(sys.bounds.lower, sys.bounds.upper, rng);
        CHECK(p.dot(flow(sys, x, u)) <= h + 1e-12);
      }
      const VectorXd ustar = optimal_control(sys, x, p);
      CHECK(p.dot(flow(sys, x, ustar)) == doctest::Approx(h).epsilon(1e-12));
    }
  }
}

TEST_CASE("dubins hamiltonian examples") {
  SystemModel sys = make_system("dubins3d");
  CHECK(hamiltonian(sys, vec({0.2, -0.3, 0.7}), vec({0, 0, 0})) == 0.0);
  // fine control grid oracle for the two pinned cases
  const auto grid_max = [&](const VectorXd& x, const VectorXd& p) {
    double best = -1e300;
    for (int i = 0; i <= 10000; ++i) {
      VectorXd u = VectorXd::Constant(1, -1.1 + 2.2 * i / 10000.0);
      best = std::max(best, p.dot(flow(sys, x, u)));
    }
    return best;
  };
  const VectorXd x1 = vec({0.1, 0.4, 0.0});
  CHECK(hamiltonian(sys, x1, vec({1, 0, 0})) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(hamiltonian(sys, x1, vec({1, 0, 0})) == doctest::Approx(grid_max(x1, vec({1, 0, 0}))));
  CHECK(hamiltonian(sys, x1, vec({0, 0, -2})) == doctest::Approx(2.2).epsilon(1e-12));
  CHECK(hamiltonian(sys, x1, vec({0, 0, -2})) ==
        doctest::Approx(grid_max(x1, vec({0, 0, -2}))).epsilon(1e-9));
}

TEST_CASE("optimal control tie-break and signs") {
  SystemModel sys = make_system("dubins3d");
  const VectorXd x = vec({0, 0, 0});
  CHECK(optimal_control(sys, x, vec({0, 0, -0.5}))(0) == -1.1);
  CHECK(optimal_control(sys, x, vec({0, 0, 0}))(0) == 1.1);

  SystemModel nine = make_system("multivehicle9d");
  VectorXd p = VectorXd::Zero(9);
  p(2) = 1;
  p(5) = -1;
  p(8) = 2;
  const VectorXd u = optimal_control(nine, VectorXd::Zero(9), p);
  CHECK(u(0) == 1.1);
  CHECK(u(1) == -1.1);
  CHECK(u(2) == 1.1);
}

TEST_CASE("flow equals control-affine split") {
  std::mt19937_64 rng(5);
  for (const char* name : {"integrator1d", "dubins3d", "air3d", "multivehicle9d"}) {
    SystemModel sys = make_system(name);
    for (int trial = 0; trial < 30; ++trial) {
      const VectorXd x = random_in(sys.domain_lo, sys.domain_hi, rng);
      const VectorXd u = random_in(sys.bounds.lower, sys.bounds.upper, rng);
      VectorXd drift;
      MatrixXd G;
      control_affine(sys, x, drift, G);
      CHECK((flow(sys, x, u) - (drift + G * u)).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("batch hamiltonian agrees with the scalar path") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> un(-2.0, 2.0);
  for (const char* name : {"integrator1d", "dubins3d", "air3d", "multivehicle9d"}) {
    SystemModel sys = make_system(name);
    const int n = 40;
    MatrixXd X(sys.state_dim, n), P(sys.state_dim, n);
    for (int j = 0; j < n; ++j) {
      X.col(j) = random_in(sys.domain_lo, sys.domain_hi, rng);
      for (int i = 0; i < sys.state_dim; ++i) P(i, j) = un(rng);
    }
    const HamiltonianBatch hb = batch_hamiltonian(sys, X, P);
    for (int j = 0; j < n; ++j) {
      CHECK(hb.H(j) == doctest::Approx(hamiltonian(sys, X.col(j), P.col(j))).epsilon(1e-12));
      CHECK((hb.u_opt.col(j) - optimal_control(sys, X.col(j), P.col(j))).cwiseAbs().maxCoeff() ==
            0.0);
      CHECK((hb.f_opt.col(j) - flow(sys, X.col(j), hb.u_opt.col(j))).cwiseAbs().maxCoeff() <
            1e-14);
    }
  }
}

TEST_CASE("integrator rollout is exact for constant control") {
  SystemModel sys = make_system("integrator1d");
  const Policy one = [](const VectorXd&, double) { return VectorXd::Constant(1, 1.0); };
  const Trajectory t = integrate(sys, VectorXd::Zero(1), one, 0.01, 1.0);
  CHECK(t.size() == 101);
  CHECK(t.states(0, 100) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_FALSE(t.control_clamped);
}

TEST_CASE("dubins rollouts: straight line and closed-form arc") {
  SystemModel sys = make_system("dubins3d");
  const Policy straight = [](const VectorXd&, double) { return VectorXd::Zero(1); };
  const Trajectory ts = integrate(sys, vec({0, 0, 0}), straight, 0.01, 1.0);
  CHECK(ts.states(0, ts.size() - 1) == doctest::Approx(0.6).epsilon(1e-10));
  CHECK(ts.states(1, ts.size() - 1) == doctest::Approx(0.0).epsilon(1e-12));

  const double u = 1.1, v = 0.6, T = 1.0;
  const Policy turn = [&](const VectorXd&, double) { return VectorXd::Constant(1, u); };
  const Trajectory ta = integrate(sys, vec({0, 0, 0}), turn, 0.001, T);
  const double xf = (v / u) * std::sin(u * T);
  const double yf = (v / u) * (1.0 - std::cos(u * T));
  CHECK(ta.states(0, ta.size() - 1) == doctest::Approx(xf).epsilon(1e-9));
  CHECK(ta.states(1, ta.size() - 1) == doctest::Approx(yf).epsilon(1e-9));
}

TEST_CASE("integrate clamps out-of-bounds policies and flags it") {
  SystemModel sys = make_system("dubins3d");
  const Policy wild = [](const VectorXd&, double) { return VectorXd::Constant(1, 9.0); };
  const Trajectory t = integrate(sys, vec({0, 0, 0}), wild, 0.01, 0.1);
  CHECK(t.control_clamped);
  CHECK(t.controls.maxCoeff() == 1.1);
}

TEST_CASE("integrate is deterministic") {
  SystemModel sys = make_system("dubins3d");
  const Policy p = [](const VectorXd& x, double t) {
    return VectorXd::Constant(1, std::sin(3.0 * x(2) + t));
  };
  const Trajectory a = integrate(sys, vec({0.1, -0.2, 0.4}), p, 0.01, 2.0);
  const Trajectory b = integrate(sys, vec({0.1, -0.2, 0.4}), p, 0.01, 2.0);
  CHECK((a.states - b.states).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.controls - b.controls).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("angle wrapping keeps headings in [-pi, pi)") {
  SystemModel sys = make_system("dubins3d");
  const Policy turn = [](const VectorXd&, double) { return VectorXd::Constant(1, 1.1); };
  const Trajectory t = integrate(sys, vec({0, 0, 3.0}), turn, 0.01, 10.0);
  CHECK(t.states.row(2).maxCoeff() < M_PI);
  CHECK(t.states.row(2).minCoeff() >= -M_PI);
}
