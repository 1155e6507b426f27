#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "rbn/random.hpp"
#include "rbn/training.hpp"

using namespace rbn;

namespace {

Batch fixed_batch(const SystemModel& sys, int n, double tau_max, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.samples_per_epoch = n;
  std::mt19937_64 rng(seed);
  Batch b = sample_batch(sys, cfg, 1.0, rng);
  b.tau *= tau_max;
  return b;
}

VectorXd flatten_grads(const MlpGrads& g) {
  std::int64_t n = 0;
  for (size_t k = 0; k < g.dW.size(); ++k) n += g.dW[k].size() + g.db[k].size();
  VectorXd out(n);
  std::int64_t at = 0;
  for (size_t k = 0; k < g.dW.size(); ++k) {
    out.segment(at, g.dW[k].size()) =
        Eigen::Map<const VectorXd>(g.dW[k].data(), g.dW[k].size());
    at += g.dW[k].size();
    out.segment(at, g.db[k].size()) = g.db[k];
    at += g.db[k].size();
  }
  return out;
}

}  // namespace

TEST_CASE("residual vanishes on the analytic 1d solution") {
  // NN == 0 makes V = l = x; for gamma = 0 the residual is |min(0, max_u u)| = 0
  SystemModel sys = make_system("integrator1d");
  ValueNet net = make_value_net(sys, 2, 8, 4);
  net.params.W[2].setZero();
  net.params.b[2].setZero();
  Batch b = fixed_batch(sys, 256, 1.0, 3);
  b.gamma.setZero();
  CHECK(residual_loss(net, b) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("residual at tau = 0 keeps the first argument at zero") {
  SystemModel sys = make_system("dubins3d");
  ValueNet net = make_value_net(sys, 2, 16, 9);
  Batch b = fixed_batch(sys, 128, 0.0, 5);
  const ResidualTerms t = residual_terms(net, b);
  CHECK(t.A.cwiseAbs().maxCoeff() == 0.0);
  for (int j = 0; j < b.size(); ++j) {
    const double expect = std::abs(std::min(0.0, t.B(j)));
    CHECK(std::abs(std::min(t.A(j), t.B(j))) == doctest::Approx(expect));
  }
}

TEST_CASE("residual gradient matches finite differences away from kinks") {
  SystemModel sys = make_system("dubins3d");
  ValueNet net = make_value_net(sys, 2, 4, 17);
  std::mt19937_64 rng(23);

  // resample until every sample is far from the min switch and l's kinks
  Batch b;
  for (int attempt = 0; attempt < 200; ++attempt) {
    b = fixed_batch(sys, 16, 0.9, 100 + attempt);
    b.tau.array() += 0.05;
    bool ok = true;
    const ResidualTerms t = residual_terms(net, b);
    for (int j = 0; j < b.size(); ++j) {
      ok = ok && std::abs(t.A(j) - t.B(j)) > 1e-3 && std::abs(std::min(t.A(j), t.B(j))) > 1e-4;
      ok = ok && b.X.col(j).head<2>().norm() > 0.05 && std::abs(t.B(j)) > 1e-4;
    }
    if (ok) break;
  }

  const auto [loss, grads] = residual_loss_gradient(net, b);
  const VectorXd ga = flatten_grads(grads);

  VectorXd theta = net.params.flatten();
  ValueNet work = net;
  const double h = 1e-6;
  for (int i = 0; i < theta.size(); ++i) {
    VectorXd tp = theta, tm = theta;
    tp(i) += h;
    tm(i) -= h;
    work.params.unflatten(tp);
    const double lp = residual_loss(work, b);
    work.params.unflatten(tm);
    const double lm = residual_loss(work, b);
    const double fd = (lp - lm) / (2.0 * h);
    CHECK(std::abs(ga(i) - fd) <= 1e-3 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("sample_batch: curriculum window and domain containment") {
  SystemModel sys = make_system("dubins3d");
  TrainConfig cfg;
  cfg.samples_per_epoch = 10000;
  std::mt19937_64 rng(substream(5, "test"));

  Batch b0 = sample_batch(sys, cfg, 0.0, rng);
  CHECK(b0.tau.cwiseAbs().maxCoeff() == 0.0);

  Batch b1 = sample_batch(sys, cfg, 1.0, rng);
  // Kolmogorov–Smirnov against uniform [0, t_f]
  std::vector<double> taus(b1.tau.data(), b1.tau.data() + b1.tau.size());
  std::sort(taus.begin(), taus.end());
  double ks = 0.0;
  const int n = static_cast<int>(taus.size());
  for (int i = 0; i < n; ++i) {
    const double f = taus[i] / cfg.t_f;
    ks = std::max(ks, std::max(std::abs((i + 1.0) / n - f), std::abs(f - double(i) / n)));
  }
  CHECK(ks < 1.36 / std::sqrt(double(n)));  // 5% critical value

  for (int j = 0; j < b1.size(); ++j) {
    CHECK((b1.X.col(j).array() >= sys.domain_lo.array()).all());
    CHECK((b1.X.col(j).array() <= sys.domain_hi.array()).all());
    CHECK(b1.gamma(j) >= cfg.gamma_min);
    CHECK(b1.gamma(j) <= cfg.gamma_max);
    CHECK(b1.tau(j) >= 0.0);
    CHECK(b1.tau(j) <= cfg.t_f);
  }

  // half-open window
  Batch bh = sample_batch(sys, cfg, 0.5, rng);
  CHECK(bh.tau.maxCoeff() <= 0.5 * cfg.t_f);
}

TEST_CASE("short training run: finite losses, boundary preserved, pretrain helps") {
  SystemModel sys = make_system("integrator1d");
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.pretrain_epochs = 50;
  cfg.samples_per_epoch = 512;
  cfg.learning_rate = 1e-4;
  cfg.hidden_layers = 2;
  cfg.hidden_size = 32;
  cfg.seed = 11;
  ValueNet net = make_value_net(sys, cfg.hidden_layers, cfg.hidden_size, 11);
  auto [trained, report] = train(sys, net, cfg);

  CHECK(report.loss.size() == 400);
  for (double l : report.loss) CHECK(std::isfinite(l));
  CHECK(report.pretrain_eval_after <= report.pretrain_eval_before);

  // curriculum progress never shrinks
  for (size_t i = 1; i < report.progress.size(); ++i)
    CHECK(report.progress[i] >= report.progress[i - 1]);

  // exact terminal condition survives training
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> un(-2.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    const VectorXd x = VectorXd::Constant(1, un(rng));
    CHECK(value_forward(trained, x, 0.0, 0.5) == boundary(sys, x));
  }
}

TEST_CASE("longer 1d training drives the held-out residual down") {
  SystemModel sys = make_system("integrator1d");
  TrainConfig cfg;
  cfg.epochs = 5000;
  cfg.pretrain_epochs = 300;
  cfg.samples_per_epoch = 1000;
  cfg.learning_rate = 3e-4;
  cfg.hidden_layers = 3;
  cfg.hidden_size = 32;
  cfg.seed = 7;
  ValueNet net = make_value_net(sys, cfg.hidden_layers, cfg.hidden_size, 7);
  auto [trained, report] = train(sys, net, cfg);

  Batch held = fixed_batch(sys, 10000, 1.0, 999);
  const double res = residual_loss(trained, held);
  CHECK(res < 0.01 * 4.0);  // domain scale |x| <= 2
}

TEST_CASE("training is deterministic under a fixed seed") {
  SystemModel sys = make_system("dubins3d");
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.pretrain_epochs = 10;
  cfg.samples_per_epoch = 128;
  cfg.hidden_layers = 2;
  cfg.hidden_size = 16;
  cfg.seed = 42;
  ValueNet a = make_value_net(sys, 2, 16, 1);
  ValueNet b = a;
  const auto ra = train(sys, a, cfg);
  const auto rb = train(sys, b, cfg);
  CHECK((ra.first.params.flatten() - rb.first.params.flatten()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(ra.second.loss == rb.second.loss);
}

TEST_CASE("train aborts on non-finite loss with a diagnostic") {
  SystemModel sys = make_system("integrator1d");
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.pretrain_epochs = 0;
  cfg.samples_per_epoch = 32;
  ValueNet net = make_value_net(sys, 2, 8, 2);
  net.params.W[0].array() = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(train(sys, net, cfg), doctest::Contains("non-finite"),
                       std::runtime_error);
}

TEST_CASE("learned policy delegates to the optimal control map") {
  SystemModel sys = make_system("dubins3d");
  ValueNet net = make_value_net(sys, 2, 16, 31);
  const Policy pol = learned_policy(net, 0.5);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> un(-0.9, 0.9);
  for (int i = 0; i < 200; ++i) {
    VectorXd x(3);
    x << un(rng), un(rng), un(rng);
    const VectorXd u = pol(x, 0.3);
    CHECK(sys.bounds.contains(u));
    const ValueGradient g = input_gradient(net, x, net.t_f - 0.3, 0.5);
    CHECK(u(0) == (g.dx(2) >= 0.0 ? 1.1 : -1.1));
  }
  // time argument clamps outside [0, t_f]
  VectorXd x(3);
  x << 0.1, 0.2, 0.3;
  CHECK(pol(x, 5.0).size() == 1);
  CHECK(pol(x, -3.0).size() == 1);
}

TEST_CASE("batched learned rollouts agree with the scalar integrator") {
  SystemModel sys = make_system("dubins3d");
  ValueNet net = make_value_net(sys, 2, 16, 13);
  const int n = 8;
  MatrixXd X0(3, n);
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> un(-0.9, 0.9);
  for (int j = 0; j < n; ++j) X0.col(j) << un(rng), un(rng), un(rng);

  const LearnedRollouts lr = learned_policy_rollouts(net, 0.3, X0, 0.01, 1.0);
  const Policy pol = learned_policy(net, 0.3);
  for (int j = 0; j < n; ++j) {
    const Trajectory t = integrate(sys, X0.col(j), pol, 0.01, 1.0);
    double mc = std::numeric_limits<double>::infinity();
    for (int k = 0; k < t.size(); ++k) mc = std::min(mc, boundary(sys, t.states.col(k)));
    CHECK(lr.min_cost(j) == doctest::Approx(mc).epsilon(1e-12));
    CHECK(lr.predicted(j) == doctest::Approx(value_forward(net, X0.col(j), 1.0, 0.3)));
  }
}
