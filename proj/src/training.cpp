#include "rbn/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "rbn/io.hpp"
#include "rbn/random.hpp"

namespace rbn {

namespace {

struct ResidualPipeline {
  MatrixXd Z;
  MlpForward fwd;
  VectorXd A, B;
  VectorXd value, dtau;
  MatrixXd dx;
  HamiltonianBatch ham;
  double loss = 0.0;
};

ResidualPipeline residual_pipeline(const ValueNet& net, const Batch& batch) {
  if (batch.size() == 0) throw std::invalid_argument("residual: empty batch");
  const int d = net.system.state_dim;
  const int n = batch.size();

  ResidualPipeline rp;
  rp.Z = normalize_inputs(net, batch.X, batch.tau, batch.gamma);
  rp.fwd = mlp_forward(net.params, rp.Z);
  const MatrixXd Gz = mlp_input_gradient(net.params, rp.fwd);

  rp.value.resize(n);
  rp.dtau.resize(n);
  rp.dx.resize(d, n);
  for (int j = 0; j < n; ++j) {
    const double tau = batch.tau(j);
    rp.value(j) = boundary(net.system, batch.X.col(j)) + tau * rp.fwd.y(j);
    rp.dx.col(j) =
        boundary_gradient(net.system, batch.X.col(j)) +
        tau * (net.norm_scale.head(d).array() * Gz.col(j).head(d).array()).matrix();
    rp.dtau(j) = rp.fwd.y(j) + tau * net.norm_scale(d) * Gz(d, j);
  }
  rp.ham = batch_hamiltonian(net.system, batch.X, rp.dx);

  rp.A.resize(n);
  rp.B.resize(n);
  double acc = 0.0;
  for (int j = 0; j < n; ++j) {
    rp.A(j) = -batch.tau(j) * rp.fwd.y(j);  // l - V with the exact wrapper
    rp.B(j) = -rp.dtau(j) + rp.ham.H(j) + batch.gamma(j) * rp.value(j);
    acc += std::abs(std::min(rp.A(j), rp.B(j)));
  }
  rp.loss = acc / n;
  return rp;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (pretrain_epochs < 0 || pretrain_epochs > epochs)
    throw std::invalid_argument("train config: pretrain_epochs must be in [0, epochs]");
  if (samples_per_epoch < 1) throw std::invalid_argument("train config: samples_per_epoch >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning_rate > 0");
  if (!(t_f > 0.0)) throw std::invalid_argument("train config: t_f > 0");
  if (gamma_max < gamma_min) throw std::invalid_argument("train config: bad gamma range");
}

Batch sample_batch(const SystemModel& sys, const TrainConfig& cfg, double progress,
                   std::mt19937_64& rng) {
  if (progress < 0.0 || progress > 1.0)
    throw std::invalid_argument("sample_batch: progress must be in [0, 1]");
  const int n = cfg.samples_per_epoch;
  const int d = sys.state_dim;
  Batch b;
  b.X.resize(d, n);
  b.tau.resize(n);
  b.gamma.resize(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < d; ++i)
      b.X(i, j) = sys.domain_lo(i) + (sys.domain_hi(i) - sys.domain_lo(i)) * unit(rng);
    b.tau(j) = progress * cfg.t_f * unit(rng);
    b.gamma(j) = cfg.gamma_min + (cfg.gamma_max - cfg.gamma_min) * unit(rng);
  }
  if (progress == 0.0) b.tau.setZero();
  return b;
}

ResidualTerms residual_terms(const ValueNet& net, const Batch& batch) {
  ResidualPipeline rp = residual_pipeline(net, batch);
  return {std::move(rp.A), std::move(rp.B), rp.loss};
}

double residual_loss(const ValueNet& net, const Batch& batch) {
  return residual_pipeline(net, batch).loss;
}

namespace {

// Builds the residual cotangents for one (sub-)batch and returns its loss sum.
double residual_cotangents(const ValueNet& net, const Batch& batch, const ResidualPipeline& rp,
                           double inv_n, Eigen::RowVectorXd& c, MatrixXd& Q) {
  const int d = net.system.state_dim;
  const int n = batch.size();
  c.setZero(n);
  Q.setZero(d + 2, n);
  double loss_sum = 0.0;
  for (int j = 0; j < n; ++j) {
    const double m = std::min(rp.A(j), rp.B(j));
    loss_sum += std::abs(m);
    const double s = m > 0.0 ? inv_n : (m < 0.0 ? -inv_n : 0.0);
    if (s == 0.0) continue;
    const double tau = batch.tau(j);
    if (rp.A(j) <= rp.B(j)) {
      c(j) = -s * tau;
    } else {
      // dB/dtheta = -d(dV/dtau) + dH/dp . d(dV/dx) + gamma dV, via Danskin.
      c(j) = s * (batch.gamma(j) * tau - 1.0);
      Q.col(j).head(d) =
          s * tau * (net.norm_scale.head(d).array() * rp.ham.f_opt.col(j).array()).matrix();
      Q(d, j) = -s * tau * net.norm_scale(d);
    }
  }
  return loss_sum;
}

void accumulate_grads(MlpGrads& acc, const MlpGrads& g) {
  if (acc.dW.empty()) {
    acc = g;
    return;
  }
  for (size_t k = 0; k < g.dW.size(); ++k) {
    acc.dW[k] += g.dW[k];
    acc.db[k] += g.db[k];
  }
}

}  // namespace

std::pair<double, MlpGrads> residual_loss_gradient(const ValueNet& net, const Batch& batch) {
  // Chunking keeps the activation planes cache-resident; accumulation order
  // over chunks is fixed, so results do not depend on the chunk size chosen
  // here only up to the usual floating-point association of this constant.
  const int n = batch.size();
  const int chunk = 8192;
  const double inv_n = 1.0 / n;

  MlpGrads acc;
  double loss_sum = 0.0;
  Eigen::RowVectorXd c;
  MatrixXd Q;
  for (int lo = 0; lo < n; lo += chunk) {
    const int len = std::min(chunk, n - lo);
    Batch sub;
    sub.X = batch.X.middleCols(lo, len);
    sub.tau = batch.tau.segment(lo, len);
    sub.gamma = batch.gamma.segment(lo, len);
    const ResidualPipeline rp = residual_pipeline(net, sub);
    loss_sum += residual_cotangents(net, sub, rp, inv_n, c, Q);
    accumulate_grads(acc, mlp_param_gradient(net.params, rp.Z, c, Q, rp.fwd));
  }
  return {loss_sum / n, std::move(acc)};
}

AdamState::AdamState(const MlpParams& p, double lr_, double b1, double b2, double e)
    : lr(lr_), beta1(b1), beta2(b2), eps(e) {
  for (size_t k = 0; k < p.W.size(); ++k) {
    mW.push_back(MatrixXd::Zero(p.W[k].rows(), p.W[k].cols()));
    vW.push_back(MatrixXd::Zero(p.W[k].rows(), p.W[k].cols()));
    mb.push_back(VectorXd::Zero(p.b[k].size()));
    vb.push_back(VectorXd::Zero(p.b[k].size()));
  }
}

void AdamState::update(MlpParams& p, const MlpGrads& g) {
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, double(t));
  const double bc2 = 1.0 - std::pow(beta2, double(t));
  const double step_size = lr * std::sqrt(bc2) / bc1;
  for (size_t k = 0; k < p.W.size(); ++k) {
    mW[k] = beta1 * mW[k] + (1.0 - beta1) * g.dW[k];
    vW[k].array() = beta2 * vW[k].array() + (1.0 - beta2) * g.dW[k].array().square();
    p.W[k].array() -= step_size * mW[k].array() / (vW[k].array().sqrt() + eps);
    mb[k] = beta1 * mb[k] + (1.0 - beta1) * g.db[k];
    vb[k].array() = beta2 * vb[k].array() + (1.0 - beta2) * g.db[k].array().square();
    p.b[k].array() -= step_size * mb[k].array() / (vb[k].array().sqrt() + eps);
  }
}

std::pair<ValueNet, TrainReport> train(const SystemModel& sys, ValueNet net,
                                       const TrainConfig& cfg) {
  cfg.validate();
  TrainReport report;
  AdamState adam(net.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps_adam);
  std::mt19937_64 batch_rng = substream(cfg.seed, "training.batches");
  std::mt19937_64 eval_rng = substream(cfg.seed, "training.eval");

  TrainConfig eval_cfg = cfg;
  eval_cfg.samples_per_epoch = std::min(cfg.samples_per_epoch, 4096);
  const Batch eval_batch = sample_batch(sys, eval_cfg, 0.0, eval_rng);
  report.pretrain_eval_before = residual_loss(net, eval_batch);

  const auto start = std::chrono::steady_clock::now();
  const int main_epochs = cfg.epochs - cfg.pretrain_epochs;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double progress = 0.0;
    if (epoch >= cfg.pretrain_epochs && main_epochs > 0)
      progress = std::min(1.0, double(epoch - cfg.pretrain_epochs + 1) / main_epochs);

    const Batch batch = sample_batch(sys, cfg, progress, batch_rng);
    auto [loss, grads] = residual_loss_gradient(net, batch);
    if (!std::isfinite(loss)) {
      double pn = 0.0;
      for (const auto& W : net.params.W) pn = std::max(pn, W.cwiseAbs().maxCoeff());
      throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                               " (max |param| = " + std::to_string(pn) +
                               ", batch tau max = " + std::to_string(batch.tau.maxCoeff()) + ")");
    }
    adam.update(net.params, grads);

    if (epoch == cfg.pretrain_epochs - 1)
      report.pretrain_eval_after = residual_loss(net, eval_batch);

    if (epoch % cfg.report_stride == 0 || epoch == cfg.epochs - 1) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      report.epoch.push_back(epoch);
      report.loss.push_back(loss);
      report.progress.push_back(progress);
      report.seconds.push_back(secs);
    }
    if (cfg.epochs >= 10000 && (epoch + 1) % (cfg.epochs / 10) == 0)
      std::fprintf(stderr, "train: epoch %d/%d, loss %.5f, window %.2f\n", epoch + 1, cfg.epochs,
                   loss, progress);
    if (cfg.checkpoint_interval > 0 && !cfg.checkpoint_path.empty() &&
        (epoch + 1) % cfg.checkpoint_interval == 0 && epoch + 1 < cfg.epochs) {
      const std::string path = cfg.checkpoint_path + ".epoch" + std::to_string(epoch + 1);
      write_value_net(path, net, "{}");
      report.checkpoint_paths.push_back(path);
    }
  }
  if (cfg.pretrain_epochs == 0) report.pretrain_eval_after = report.pretrain_eval_before;
  if (!cfg.checkpoint_path.empty()) {
    write_value_net(cfg.checkpoint_path, net, "{}");
    report.checkpoint_paths.push_back(cfg.checkpoint_path);
  }
  return {std::move(net), std::move(report)};
}

Policy learned_policy(const ValueNet& net, double gamma) {
  return [net, gamma](const VectorXd& x, double t) {
    const double tau = std::clamp(net.t_f - t, 0.0, net.t_f);
    const ValueGradient g = input_gradient(net, x, tau, gamma);
    return optimal_control(net.system, x, g.dx);
  };
}

LearnedRollouts learned_policy_rollouts(const ValueNet& net, double gamma, const MatrixXd& X0,
                                        double dt, double horizon) {
  const SystemModel& sys = net.system;
  const int n = static_cast<int>(X0.cols());
  const int steps = static_cast<int>(std::floor(horizon / dt + 1e-9));
  const VectorXd gammas = VectorXd::Constant(n, gamma);

  LearnedRollouts out;
  out.min_cost.resize(n);
  for (int j = 0; j < n; ++j) out.min_cost(j) = boundary(sys, X0.col(j));
  out.predicted = batch_value(net, X0, VectorXd::Constant(n, std::min(horizon, net.t_f)), gammas);

  MatrixXd X = X0;
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    const double tau = std::clamp(net.t_f - t, 0.0, net.t_f);
    const BatchValueGradient g = batch_value_gradient(net, X, VectorXd::Constant(n, tau), gammas);
    const HamiltonianBatch hb = batch_hamiltonian(sys, X, g.dx);
    for (int j = 0; j < n; ++j) {
      X.col(j) = rk4_step(sys, X.col(j), hb.u_opt.col(j), dt);
      out.min_cost(j) = std::min(out.min_cost(j), boundary(sys, X.col(j)));
    }
  }
  out.final_states = std::move(X);
  return out;
}

}  // namespace rbn
