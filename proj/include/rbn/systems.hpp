#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace rbn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Wraps an angle to [-pi, pi).
double wrap_angle(double theta);

// cos/sin of a heading through one shared call site, so every system and
// solver path produces bitwise-identical trig values.
void heading_trig(double theta, double& c, double& s);

struct ControlBounds {
  VectorXd lower;
  VectorXd upper;

  int dim() const { return static_cast<int>(lower.size()); }
  VectorXd clamp(const VectorXd& u) const { return u.cwiseMax(lower).cwiseMin(upper); }
  bool contains(const VectorXd& u, double tol = 1e-12) const;
};

enum class SystemKind { Integrator1D, Dubins3D, Air3D, MultiVehicle9D };

// A concrete dynamical system: dynamics, failure-distance function, exact
// Hamiltonian / optimal control over the control box, and the state domain
// used for value-function training and sampling.
struct SystemModel {
  SystemKind kind = SystemKind::Dubins3D;
  std::string name = "dubins3d";
  int state_dim = 3;
  int control_dim = 1;
  double speed = 0.6;  // m/s, fixed forward velocity where applicable
  ControlBounds bounds;
  std::vector<int> periodic_dims;
  double collision_radius = 0.25;           // m, inter-agent (air3d, multivehicle9d)
  Eigen::Vector2d obstacle_center{0.0, 0.0};  // dubins3d static obstacle
  double obstacle_radius = 0.5;
  VectorXd domain_lo;  // training / sampling domain
  VectorXd domain_hi;

  bool is_periodic(int d) const;
};

// Factory for the named systems ("integrator1d", "dubins3d", "air3d",
// "multivehicle9d") with their default parameters.
SystemModel make_system(const std::string& name);

// State derivative f(x, u).
VectorXd flow(const SystemModel& sys, const VectorXd& x, const VectorXd& u);

// Control-affine split f(x, u) = drift(x) + G(x) u. flow() agrees with it.
void control_affine(const SystemModel& sys, const VectorXd& x, VectorXd& drift, MatrixXd& G);

// Signed failure distance l(x); negative inside the failure set.
double boundary(const SystemModel& sys, const VectorXd& x);

// Gradient of l. Where l is a min over branches the active branch's gradient
// is used, ties broken toward the lowest pair index.
VectorXd boundary_gradient(const SystemModel& sys, const VectorXd& x);

// H(x, p) = max_{u in box} p . f(x, u), in closed form.
double hamiltonian(const SystemModel& sys, const VectorXd& x, const VectorXd& p);

// argmax_u p . f(x, u). Channels with zero coefficient take the upper bound.
VectorXd optimal_control(const SystemModel& sys, const VectorXd& x, const VectorXd& p);

// Batched Hamiltonian data over state columns X and costate columns P:
// H values, the maximizing controls U, and f(x, u*) (= dH/dp).
struct HamiltonianBatch {
  VectorXd H;
  MatrixXd u_opt;
  MatrixXd f_opt;
};
HamiltonianBatch batch_hamiltonian(const SystemModel& sys, const MatrixXd& X, const MatrixXd& P);

// Per-dimension bound on |f_i| over the control box and a state box; the
// Lax-Friedrichs dissipation coefficients.
VectorXd max_flow_magnitude(const SystemModel& sys, const VectorXd& state_lo, const VectorXd& state_hi);

struct Trajectory {
  VectorXd times;    // strictly increasing
  MatrixXd states;   // state_dim x n
  MatrixXd controls; // control_dim x (n - 1), zero-order hold per interval
  bool control_clamped = false;  // a policy output fell outside the bounds

  int size() const { return static_cast<int>(times.size()); }
};

using Policy = std::function<VectorXd(const VectorXd& x, double t)>;

// Fixed-step RK4 under zero-order-hold control; periodic state dimensions are
// wrapped to [-pi, pi) after every step. Out-of-bounds policy outputs are
// clamped and flagged.
Trajectory integrate(const SystemModel& sys, const VectorXd& x0, const Policy& policy,
                     double dt, double horizon);

// One RK4 step with constant control (wraps periodic dims).
VectorXd rk4_step(const SystemModel& sys, const VectorXd& x, const VectorXd& u, double dt);

}  // namespace rbn
