#include "rbn/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "rbn/threading.hpp"

namespace rbn {

namespace {

void check_range(double v, double lo, double hi, const char* what) {
  if (!(v >= lo - 1e-9 && v <= hi + 1e-9))
    throw std::invalid_argument(std::string(what) + " = " + std::to_string(v) + " outside [" +
                                std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

// Branch-free sine/cosine over a contiguous buffer. libm sin/cos dominate
// the training step otherwise (Eigen has no vectorized double trig); this
// polynomial kernel auto-vectorizes and is accurate to ~1 ulp for the
// |x| <~ 1e5 arguments the network produces.
void sincos_buffer(const double* x, double* sout, double* cout, Eigen::Index n) {
  constexpr double two_over_pi = 0.63661977236758134308;
  constexpr double pio2_1 = 1.57079632673412561417;
  constexpr double pio2_2 = 6.07710050650619224932e-11;
  constexpr double pio2_3 = 2.02226624879595063154e-21;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double k = std::rint(x[i] * two_over_pi);
    const double r = ((x[i] - k * pio2_1) - k * pio2_2) - k * pio2_3;
    const double z = r * r;
    double ps = 1.58962301576546568060e-10;
    ps = ps * z - 2.50507477628578072866e-8;
    ps = ps * z + 2.75573136213857245213e-6;
    ps = ps * z - 1.98412698295895385996e-4;
    ps = ps * z + 8.33333333332211858878e-3;
    ps = ps * z - 1.66666666666666307295e-1;
    const double sin_r = r + r * z * ps;
    double pc = -1.13585365213876817300e-11;
    pc = pc * z + 2.08757008419747316778e-9;
    pc = pc * z - 2.75573141792967388112e-7;
    pc = pc * z + 2.48015872888517179954e-5;
    pc = pc * z - 1.38888888888730564116e-3;
    pc = pc * z + 4.16666666666665929218e-2;
    const double cos_r = 1.0 - 0.5 * z + z * z * pc;
    const std::int64_t q = static_cast<std::int64_t>(k) & 3;
    const double s1 = q == 1 || q == 3 ? cos_r : sin_r;
    const double c1 = q == 1 || q == 3 ? sin_r : cos_r;
    sout[i] = q == 2 || q == 3 ? -s1 : s1;
    cout[i] = q == 1 || q == 2 ? -c1 : c1;
  }
}

void sincos_matrix(const MatrixXd& X, MatrixXd& S, MatrixXd& C) {
  S.resize(X.rows(), X.cols());
  C.resize(X.rows(), X.cols());
  const Eigen::Index n = X.size();
  const Eigen::Index grain = 1 << 16;
  if (n < 2 * grain || thread_count() <= 1) {
    sincos_buffer(X.data(), S.data(), C.data(), n);
    return;
  }
  // elementwise, so chunking cannot change any output bit
  const Eigen::Index chunks = (n + grain - 1) / grain;
  parallel_for(chunks, [&](std::int64_t ci) {
    const Eigen::Index lo = ci * grain;
    const Eigen::Index len = std::min(grain, n - lo);
    sincos_buffer(X.data() + lo, S.data() + lo, C.data() + lo, len);
  });
}

}  // namespace

std::int64_t MlpParams::num_params() const {
  std::int64_t n = 0;
  for (size_t k = 0; k < W.size(); ++k) n += W[k].size() + b[k].size();
  return n;
}

VectorXd MlpParams::flatten() const {
  VectorXd theta(num_params());
  std::int64_t at = 0;
  for (size_t k = 0; k < W.size(); ++k) {
    theta.segment(at, W[k].size()) = Eigen::Map<const VectorXd>(W[k].data(), W[k].size());
    at += W[k].size();
    theta.segment(at, b[k].size()) = b[k];
    at += b[k].size();
  }
  return theta;
}

void MlpParams::unflatten(const VectorXd& theta) {
  std::int64_t at = 0;
  for (size_t k = 0; k < W.size(); ++k) {
    Eigen::Map<VectorXd>(W[k].data(), W[k].size()) = theta.segment(at, W[k].size());
    at += W[k].size();
    b[k] = theta.segment(at, b[k].size());
    at += b[k].size();
  }
}

MlpParams init_mlp(std::uint64_t seed, int in_dim, int hidden_layers, int hidden_size,
                   double omega0) {
  if (in_dim < 1 || hidden_layers < 1 || hidden_size < 1)
    throw std::invalid_argument("init_mlp: bad architecture");
  MlpParams p;
  p.omega0 = omega0;
  std::mt19937_64 rng(seed);
  const auto fill = [&](MatrixXd& M, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::int64_t i = 0; i < M.size(); ++i) M.data()[i] = dist(rng);
  };
  for (int k = 0; k <= hidden_layers; ++k) {
    const int rows = k == hidden_layers ? 1 : hidden_size;
    const int cols = k == 0 ? in_dim : hidden_size;
    MatrixXd W(rows, cols);
    const double bound = k == 0 ? 1.0 / in_dim : std::sqrt(6.0 / cols) / omega0;
    fill(W, bound);
    p.W.push_back(std::move(W));
    p.b.push_back(VectorXd::Zero(rows));
  }
  return p;
}

MlpForward mlp_forward(const MlpParams& p, const MatrixXd& Z) {
  const int L = p.hidden_layers();
  MlpForward f;
  f.A.resize(L);
  f.C.resize(L);
  MatrixXd S;
  for (int k = 0; k < L; ++k) {
    S.noalias() = p.W[k] * (k == 0 ? Z : f.A[k - 1]);
    S.colwise() += p.b[k];
    S *= p.omega0;
    sincos_matrix(S, f.A[k], f.C[k]);
  }
  f.y.noalias() = p.W[L] * f.A[L - 1];
  f.y.array() += p.b[L](0);
  return f;
}

MatrixXd mlp_input_gradient(const MlpParams& p, const MlpForward& f) {
  const int L = p.hidden_layers();
  const double w0 = p.omega0;
  // H_k = dy/ds_k, starting from the output layer's weight row.
  MatrixXd H(f.C[L - 1].rows(), f.C[L - 1].cols());
  H.array() = w0 * (f.C[L - 1].array().colwise() * Eigen::ArrayXd(p.W[L].transpose().array()));
  MatrixXd R(H.rows(), H.cols());
  for (int k = L - 1; k > 0; --k) {
    R.noalias() = p.W[k].transpose() * H;
    H.array() = w0 * f.C[k - 1].array() * R.array();
  }
  return p.W[0].transpose() * H;
}

MlpGrads mlp_param_gradient(const MlpParams& p, const MatrixXd& Z, const Eigen::RowVectorXd& c,
                            const MatrixXd& Q) {
  return mlp_param_gradient(p, Z, c, Q, mlp_forward(p, Z));
}

MlpGrads mlp_param_gradient(const MlpParams& p, const MatrixXd& Z, const Eigen::RowVectorXd& c,
                            const MatrixXd& Q, const MlpForward& f) {
  const int L = p.hidden_layers();
  const int h = p.hidden_size();
  const Eigen::Index n = Z.cols();
  const double w0 = p.omega0;
  const bool tangent = Q.size() > 0;

  // Tangent (directional-derivative) pass along Q.
  std::vector<MatrixXd> T(tangent ? L : 0), U(tangent ? L : 0);
  if (tangent) {
    for (int k = 0; k < L; ++k) {
      T[k].noalias() = p.W[k] * (k == 0 ? Q : U[k - 1]);
      U[k].resize(h, n);
      U[k].array() = w0 * f.C[k].array() * T[k].array();
    }
  }

  MlpGrads g;
  g.dW.resize(L + 1);
  g.db.resize(L + 1);

  // Output layer.
  g.dW[L].noalias() = c * f.A[L - 1].transpose();
  if (tangent) g.dW[L].noalias() += Eigen::RowVectorXd::Ones(n) * U[L - 1].transpose();
  g.db[L] = VectorXd::Constant(1, c.sum());

  MatrixXd Abar = p.W[L].transpose() * c;  // h x n
  MatrixXd Ubar, Sbar(h, n), Tbar;
  if (tangent) {
    Ubar = p.W[L].transpose().replicate(1, n);
    Tbar.resize(h, n);
  }

  for (int k = L - 1; k >= 0; --k) {
    Sbar.array() = w0 * f.C[k].array() * Abar.array();
    if (tangent) {
      Sbar.array() -= (w0 * w0) * f.A[k].array() * T[k].array() * Ubar.array();
      Tbar.array() = w0 * f.C[k].array() * Ubar.array();
    }
    const MatrixXd& prevA = k == 0 ? Z : f.A[k - 1];
    g.dW[k].noalias() = Sbar * prevA.transpose();
    if (tangent) g.dW[k].noalias() += Tbar * (k == 0 ? Q : U[k - 1]).transpose();
    g.db[k] = Sbar.rowwise().sum();
    if (k > 0) {
      Abar.noalias() = p.W[k].transpose() * Sbar;
      if (tangent) Ubar.noalias() = p.W[k].transpose() * Tbar;
    }
  }
  return g;
}

ValueNet make_value_net(const SystemModel& sys, int hidden_layers, int hidden_size,
                        std::uint64_t seed, double t_f, double gamma_min, double gamma_max,
                        double omega0) {
  if (!(t_f > 0.0)) throw std::invalid_argument("make_value_net: t_f must be positive");
  if (gamma_max < gamma_min) throw std::invalid_argument("make_value_net: bad gamma range");
  ValueNet net;
  net.system = sys;
  net.t_f = t_f;
  net.gamma_min = gamma_min;
  net.gamma_max = gamma_max;
  const int d = sys.state_dim;
  net.norm_scale.resize(d + 2);
  net.norm_offset.resize(d + 2);
  for (int i = 0; i < d; ++i) {
    const double span = sys.domain_hi(i) - sys.domain_lo(i);
    net.norm_scale(i) = 2.0 / span;
    net.norm_offset(i) = -(sys.domain_hi(i) + sys.domain_lo(i)) / span;
  }
  net.norm_scale(d) = 1.0 / t_f;
  net.norm_offset(d) = 0.0;
  const double grange = gamma_max - gamma_min;
  net.norm_scale(d + 1) = grange > 0.0 ? 1.0 / grange : 0.0;
  net.norm_offset(d + 1) = grange > 0.0 ? -gamma_min / grange : 0.0;
  net.params = init_mlp(seed, d + 2, hidden_layers, hidden_size, omega0);
  return net;
}

MatrixXd normalize_inputs(const ValueNet& net, const MatrixXd& X, const VectorXd& tau,
                          const VectorXd& gamma) {
  const int d = net.system.state_dim;
  const int n = static_cast<int>(X.cols());
  MatrixXd Z(d + 2, n);
  Z.topRows(d) = (X.array().colwise() * net.norm_scale.head(d).array()).colwise() +
                 net.norm_offset.head(d).array();
  Z.row(d) = (net.norm_scale(d) * tau.array() + net.norm_offset(d)).transpose();
  Z.row(d + 1) = (net.norm_scale(d + 1) * gamma.array() + net.norm_offset(d + 1)).transpose();
  return Z;
}

VectorXd batch_value(const ValueNet& net, const MatrixXd& X, const VectorXd& tau,
                     const VectorXd& gamma) {
  const int n = static_cast<int>(X.cols());
  for (int j = 0; j < n; ++j) {
    check_range(tau(j), 0.0, net.t_f, "tau");
    check_range(gamma(j), net.gamma_min, net.gamma_max, "gamma");
  }
  const MlpForward f = mlp_forward(net.params, normalize_inputs(net, X, tau, gamma));
  VectorXd out(n);
  for (int j = 0; j < n; ++j)
    out(j) = boundary(net.system, X.col(j)) + tau(j) * f.y(j);
  return out;
}

BatchValueGradient batch_value_gradient(const ValueNet& net, const MatrixXd& X,
                                        const VectorXd& tau, const VectorXd& gamma) {
  const int d = net.system.state_dim;
  const int n = static_cast<int>(X.cols());
  for (int j = 0; j < n; ++j) {
    check_range(tau(j), 0.0, net.t_f, "tau");
    check_range(gamma(j), net.gamma_min, net.gamma_max, "gamma");
  }
  const MatrixXd Z = normalize_inputs(net, X, tau, gamma);
  const MlpForward f = mlp_forward(net.params, Z);
  const MatrixXd Gz = mlp_input_gradient(net.params, f);

  BatchValueGradient out;
  out.value.resize(n);
  out.dx.resize(d, n);
  out.dtau.resize(n);
  out.dgamma.resize(n);
  out.nn = f.y.transpose();
  for (int j = 0; j < n; ++j) {
    const double l = boundary(net.system, X.col(j));
    out.value(j) = l + tau(j) * f.y(j);
    out.dx.col(j) = boundary_gradient(net.system, X.col(j)) +
                    tau(j) * (net.norm_scale.head(d).array() * Gz.col(j).head(d).array()).matrix();
    out.dtau(j) = f.y(j) + tau(j) * net.norm_scale(d) * Gz(d, j);
    out.dgamma(j) = tau(j) * net.norm_scale(d + 1) * Gz(d + 1, j);
  }
  return out;
}

double value_forward(const ValueNet& net, const VectorXd& x, double tau, double gamma) {
  return batch_value(net, x, VectorXd::Constant(1, tau), VectorXd::Constant(1, gamma))(0);
}

ValueGradient input_gradient(const ValueNet& net, const VectorXd& x, double tau, double gamma) {
  const BatchValueGradient b =
      batch_value_gradient(net, x, VectorXd::Constant(1, tau), VectorXd::Constant(1, gamma));
  return {b.value(0), b.dx.col(0), b.dtau(0), b.dgamma(0)};
}

}  // namespace rbn
