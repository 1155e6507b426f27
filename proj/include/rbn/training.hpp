#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rbn/network.hpp"
#include "rbn/systems.hpp"

namespace rbn {

struct TrainConfig {
  int epochs = 30000;
  int pretrain_epochs = 2000;
  int samples_per_epoch = 8192;
  double learning_rate = 2e-5;
  double gamma_min = 0.0;
  double gamma_max = 1.0;
  double t_f = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::uint64_t seed = 0;
  int hidden_layers = 3;
  int hidden_size = 128;
  double omega0 = 30.0;
  int checkpoint_interval = 0;    // epochs between checkpoints; 0 = final only
  std::string checkpoint_path;    // written when non-empty
  int report_stride = 1;          // record every k-th epoch

  void validate() const;
};

struct TrainReport {
  std::vector<int> epoch;
  std::vector<double> loss;
  std::vector<double> progress;
  std::vector<double> seconds;  // wall clock since start
  std::vector<std::string> checkpoint_paths;
  double pretrain_eval_before = 0.0;  // residual on a fixed tau=0 batch at epoch 0
  double pretrain_eval_after = 0.0;   // same batch after the pretrain phase
};

struct Batch {
  MatrixXd X;      // states, columns
  VectorXd tau;
  VectorXd gamma;
  int size() const { return static_cast<int>(tau.size()); }
};

// x uniform on the system domain, gamma uniform on the configured range,
// tau uniform on [0, progress * t_f] (progress 0 pins tau = 0).
Batch sample_batch(const SystemModel& sys, const TrainConfig& cfg, double progress,
                   std::mt19937_64& rng);

// Per-sample terms of the variational-inequality residual:
//   A = l - V,   B = -dV/dtau + H(x, dV/dx) + gamma V,
// residual = |min(A, B)|.
struct ResidualTerms {
  VectorXd A;
  VectorXd B;
  double loss;  // mean |min(A, B)|
};
ResidualTerms residual_terms(const ValueNet& net, const Batch& batch);

double residual_loss(const ValueNet& net, const Batch& batch);

// Loss plus the exact parameter gradient (double backprop through the
// analytic input gradients).
std::pair<double, MlpGrads> residual_loss_gradient(const ValueNet& net, const Batch& batch);

struct AdamState {
  double lr, beta1, beta2, eps;
  std::vector<MatrixXd> mW, vW;
  std::vector<VectorXd> mb, vb;
  std::int64_t t = 0;

  explicit AdamState(const MlpParams& p, double lr_, double b1, double b2, double e);
  void update(MlpParams& p, const MlpGrads& g);
};

// Self-supervised training: pretrain epochs at tau = 0, then a linear time
// curriculum opening the tau window to t_f. One Adam update per epoch.
std::pair<ValueNet, TrainReport> train(const SystemModel& sys, ValueNet net,
                                       const TrainConfig& cfg);

// u(x, t) = argmax_u dV/dx . f(x, u) at tau = clamp(t_f - t, 0, t_f).
Policy learned_policy(const ValueNet& net, double gamma);

// Lockstep batched rollouts under the learned optimal policy. Returns the
// value predicted at the initial state (tau = min(horizon, t_f)) and the min
// of l along each trajectory including the initial state.
struct LearnedRollouts {
  VectorXd predicted;
  VectorXd min_cost;
  MatrixXd final_states;
};
LearnedRollouts learned_policy_rollouts(const ValueNet& net, double gamma, const MatrixXd& X0,
                                        double dt, double horizon);

}  // namespace rbn
