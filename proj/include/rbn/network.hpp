#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "rbn/systems.hpp"

namespace rbn {

// Fully connected sine network: every hidden layer computes sin(omega0 (W a + b)),
// the output layer is linear. W[0] is hidden x in, W[L] is 1 x hidden.
struct MlpParams {
  std::vector<MatrixXd> W;
  std::vector<VectorXd> b;
  double omega0 = 30.0;

  int in_dim() const { return static_cast<int>(W.front().cols()); }
  int hidden_size() const { return static_cast<int>(W.front().rows()); }
  int hidden_layers() const { return static_cast<int>(W.size()) - 1; }
  std::int64_t num_params() const;

  // Flat views in a fixed order (W0, b0, W1, b1, ...), column-major per block.
  VectorXd flatten() const;
  void unflatten(const VectorXd& theta);
};

// Deterministic sine-net initialization: first layer U[-1/in, 1/in], deeper
// layers U[-sqrt(6/fan_in)/omega0, sqrt(6/fan_in)/omega0], zero biases.
MlpParams init_mlp(std::uint64_t seed, int in_dim, int hidden_layers, int hidden_size,
                   double omega0 = 30.0);

// Value model with the exact terminal wrapper
//   V(x, tau, gamma) = l(x) + tau * NN(normalize(x, tau, gamma)),
// so V(x, 0, gamma) = l(x) identically. Inputs are normalized with constants
// stored here, making checkpoints self-describing.
struct ValueNet {
  MlpParams params;
  SystemModel system;
  double t_f = 1.0;
  double gamma_min = 0.0;
  double gamma_max = 1.0;
  VectorXd norm_scale;   // z = norm_scale .* (x, tau, gamma) + norm_offset
  VectorXd norm_offset;

  int in_dim() const { return system.state_dim + 2; }
};

// Builds a net for a system: normalization from the system domain, t_f, and
// the gamma range; parameters from init_mlp.
ValueNet make_value_net(const SystemModel& sys, int hidden_layers, int hidden_size,
                        std::uint64_t seed, double t_f = 1.0, double gamma_min = 0.0,
                        double gamma_max = 1.0, double omega0 = 30.0);

// Normalized network inputs for a batch of states (columns).
MatrixXd normalize_inputs(const ValueNet& net, const MatrixXd& X, const VectorXd& tau,
                          const VectorXd& gamma);

double value_forward(const ValueNet& net, const VectorXd& x, double tau, double gamma);

struct ValueGradient {
  double value;
  VectorXd dx;
  double dtau;
  double dgamma;
};

// Exact analytic derivatives of V in its inputs.
ValueGradient input_gradient(const ValueNet& net, const VectorXd& x, double tau, double gamma);

// Batched evaluation over state columns; taus/gammas per column.
struct BatchValueGradient {
  VectorXd value;
  MatrixXd dx;       // state_dim x n
  VectorXd dtau;
  VectorXd dgamma;
  VectorXd nn;       // raw network outputs
};
BatchValueGradient batch_value_gradient(const ValueNet& net, const MatrixXd& X,
                                        const VectorXd& tau, const VectorXd& gamma);
VectorXd batch_value(const ValueNet& net, const MatrixXd& X, const VectorXd& tau,
                     const VectorXd& gamma);

// --- raw MLP kernels -------------------------------------------------------

struct MlpForward {
  std::vector<MatrixXd> A;  // sine activations per layer
  std::vector<MatrixXd> C;  // cos(omega0 s) per layer
  Eigen::RowVectorXd y;     // network outputs
};

MlpForward mlp_forward(const MlpParams& p, const MatrixXd& Z);

// d y / d z for every column of Z (reverse pass over the cached forward).
MatrixXd mlp_input_gradient(const MlpParams& p, const MlpForward& f);

// Parameter gradient of sum_j [ c_j y_j + q_j . (dy/dz)_j ]: reverse mode
// through both the forward pass and the directional-derivative (tangent)
// pass, i.e. exact second-order mixed derivatives. Q may be empty when all
// q_j = 0.
struct MlpGrads {
  std::vector<MatrixXd> dW;
  std::vector<VectorXd> db;
};
MlpGrads mlp_param_gradient(const MlpParams& p, const MatrixXd& Z, const Eigen::RowVectorXd& c,
                            const MatrixXd& Q);
// Same, reusing an existing forward cache for Z.
MlpGrads mlp_param_gradient(const MlpParams& p, const MatrixXd& Z, const Eigen::RowVectorXd& c,
                            const MatrixXd& Q, const MlpForward& f);

}  // namespace rbn
