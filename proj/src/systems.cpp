#include "rbn/systems.hpp"

#include <cmath>
#include <stdexcept>

namespace rbn {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_dim(const VectorXd& v, int want, const char* what) {
  if (static_cast<int>(v.size()) != want)
    throw std::invalid_argument(std::string(what) + ": expected dimension " + std::to_string(want) +
                                ", got " + std::to_string(v.size()));
}

// max over u_k in [lo, hi] of c * u_k
inline double box_max(double c, double lo, double hi) { return std::max(c * lo, c * hi); }

// argmax over u_k in [lo, hi] of c * u_k; tie (c == 0) resolves to hi.
inline double box_argmax(double c, double lo, double hi) { return c >= 0.0 ? hi : lo; }

}  // namespace

__attribute__((noinline)) void heading_trig(double theta, double& c, double& s) {
  c = std::cos(theta);
  s = std::sin(theta);
}

double wrap_angle(double theta) {
  double w = std::remainder(theta, 2.0 * kPi);  // (-pi, pi]
  if (w == kPi) w = -kPi;
  return w;
}

bool ControlBounds::contains(const VectorXd& u, double tol) const {
  return (u.array() >= lower.array() - tol).all() && (u.array() <= upper.array() + tol).all();
}

bool SystemModel::is_periodic(int d) const {
  for (int p : periodic_dims)
    if (p == d) return true;
  return false;
}

SystemModel make_system(const std::string& name) {
  SystemModel s;
  s.name = name;
  if (name == "integrator1d") {
    s.kind = SystemKind::Integrator1D;
    s.state_dim = 1;
    s.control_dim = 1;
    s.speed = 0.0;
    s.bounds.lower = VectorXd::Constant(1, -1.0);
    s.bounds.upper = VectorXd::Constant(1, 1.0);
    s.periodic_dims = {};
    s.domain_lo = VectorXd::Constant(1, -2.0);
    s.domain_hi = VectorXd::Constant(1, 2.0);
  } else if (name == "dubins3d") {
    s.kind = SystemKind::Dubins3D;
    s.state_dim = 3;
    s.control_dim = 1;
    s.speed = 0.6;
    s.bounds.lower = VectorXd::Constant(1, -1.1);
    s.bounds.upper = VectorXd::Constant(1, 1.1);
    s.periodic_dims = {2};
    s.obstacle_center = {0.0, 0.0};
    s.obstacle_radius = 0.5;
    s.domain_lo = VectorXd(3);
    s.domain_lo << -1.0, -1.0, -kPi;
    s.domain_hi = VectorXd(3);
    s.domain_hi << 1.0, 1.0, kPi;
  } else if (name == "air3d") {
    // Relative state (x, y, psi) between two vehicles, ego at the origin.
    s.kind = SystemKind::Air3D;
    s.state_dim = 3;
    s.control_dim = 2;  // (ego turn rate, other turn rate), both cooperative
    s.speed = 0.6;
    s.bounds.lower = VectorXd::Constant(2, -1.1);
    s.bounds.upper = VectorXd::Constant(2, 1.1);
    s.periodic_dims = {2};
    s.collision_radius = 0.4;
    s.domain_lo = VectorXd(3);
    s.domain_lo << -2.0, -2.0, -kPi;
    s.domain_hi = VectorXd(3);
    s.domain_hi << 2.0, 2.0, kPi;
  } else if (name == "multivehicle9d") {
    s.kind = SystemKind::MultiVehicle9D;
    s.state_dim = 9;
    s.control_dim = 3;
    s.speed = 0.6;
    s.bounds.lower = VectorXd::Constant(3, -1.1);
    s.bounds.upper = VectorXd::Constant(3, 1.1);
    s.periodic_dims = {2, 5, 8};
    s.collision_radius = 0.25;
    s.domain_lo = VectorXd(9);
    s.domain_hi = VectorXd(9);
    for (int a = 0; a < 3; ++a) {
      s.domain_lo.segment(3 * a, 3) << -1.0, -1.0, -kPi;
      s.domain_hi.segment(3 * a, 3) << 1.0, 1.0, kPi;
    }
  } else {
    throw std::invalid_argument("unknown system: " + name);
  }
  return s;
}

VectorXd flow(const SystemModel& sys, const VectorXd& x, const VectorXd& u) {
  check_dim(x, sys.state_dim, "flow: state");
  check_dim(u, sys.control_dim, "flow: control");
  VectorXd dx(sys.state_dim);
  switch (sys.kind) {
    case SystemKind::Integrator1D:
      dx(0) = u(0);
      break;
    case SystemKind::Dubins3D: {
      double c, s;
      heading_trig(x(2), c, s);
      dx(0) = sys.speed * c;
      dx(1) = sys.speed * s;
      dx(2) = u(0);
      break;
    }
    case SystemKind::Air3D: {
      const double v = sys.speed;
      double c, s;
      heading_trig(x(2), c, s);
      dx(0) = -v + v * c + u(0) * x(1);
      dx(1) = v * s - u(0) * x(0);
      dx(2) = u(1) - u(0);
      break;
    }
    case SystemKind::MultiVehicle9D:
      for (int a = 0; a < 3; ++a) {
        double c, s;
        heading_trig(x(3 * a + 2), c, s);
        dx(3 * a + 0) = sys.speed * c;
        dx(3 * a + 1) = sys.speed * s;
        dx(3 * a + 2) = u(a);
      }
      break;
  }
  return dx;
}

void control_affine(const SystemModel& sys, const VectorXd& x, VectorXd& drift, MatrixXd& G) {
  check_dim(x, sys.state_dim, "control_affine: state");
  drift.setZero(sys.state_dim);
  G.setZero(sys.state_dim, sys.control_dim);
  switch (sys.kind) {
    case SystemKind::Integrator1D:
      G(0, 0) = 1.0;
      break;
    case SystemKind::Dubins3D: {
      double c, s;
      heading_trig(x(2), c, s);
      drift(0) = sys.speed * c;
      drift(1) = sys.speed * s;
      G(2, 0) = 1.0;
      break;
    }
    case SystemKind::Air3D: {
      const double v = sys.speed;
      double c, s;
      heading_trig(x(2), c, s);
      drift(0) = -v + v * c;
      drift(1) = v * s;
      G(0, 0) = x(1);
      G(1, 0) = -x(0);
      G(2, 0) = -1.0;
      G(2, 1) = 1.0;
      break;
    }
    case SystemKind::MultiVehicle9D:
      for (int a = 0; a < 3; ++a) {
        double c, s;
        heading_trig(x(3 * a + 2), c, s);
        drift(3 * a + 0) = sys.speed * c;
        drift(3 * a + 1) = sys.speed * s;
        G(3 * a + 2, a) = 1.0;
      }
      break;
  }
}

double boundary(const SystemModel& sys, const VectorXd& x) {
  check_dim(x, sys.state_dim, "boundary: state");
  switch (sys.kind) {
    case SystemKind::Integrator1D:
      return x(0);
    case SystemKind::Dubins3D:
      return (x.head<2>() - sys.obstacle_center).norm() - sys.obstacle_radius;
    case SystemKind::Air3D:
      return x.head<2>().norm() - sys.collision_radius;
    case SystemKind::MultiVehicle9D: {
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
          const double d = (x.segment<2>(3 * i) - x.segment<2>(3 * j)).norm() - sys.collision_radius;
          best = std::min(best, d);
        }
      return best;
    }
  }
  return 0.0;
}

VectorXd boundary_gradient(const SystemModel& sys, const VectorXd& x) {
  check_dim(x, sys.state_dim, "boundary_gradient: state");
  VectorXd g = VectorXd::Zero(sys.state_dim);
  switch (sys.kind) {
    case SystemKind::Integrator1D:
      g(0) = 1.0;
      break;
    case SystemKind::Dubins3D: {
      const Eigen::Vector2d d = x.head<2>() - sys.obstacle_center;
      const double n = d.norm();
      if (n > 0.0) g.head<2>() = d / n;
      break;
    }
    case SystemKind::Air3D: {
      const Eigen::Vector2d d = x.head<2>();
      const double n = d.norm();
      if (n > 0.0) g.head<2>() = d / n;
      break;
    }
    case SystemKind::MultiVehicle9D: {
      double best = std::numeric_limits<double>::infinity();
      int bi = 0, bj = 1;
      for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
          const double d = (x.segment<2>(3 * i) - x.segment<2>(3 * j)).norm() - sys.collision_radius;
          if (d < best) {  // strict: ties keep the lowest pair index
            best = d;
            bi = i;
            bj = j;
          }
        }
      const Eigen::Vector2d d = x.segment<2>(3 * bi) - x.segment<2>(3 * bj);
      const double n = d.norm();
      if (n > 0.0) {
        g.segment<2>(3 * bi) = d / n;
        g.segment<2>(3 * bj) = -d / n;
      }
      break;
    }
  }
  return g;
}

double hamiltonian(const SystemModel& sys, const VectorXd& x, const VectorXd& p) {
  check_dim(p, sys.state_dim, "hamiltonian: costate");
  VectorXd drift;
  MatrixXd G;
  control_affine(sys, x, drift, G);
  double h = p.dot(drift);
  const VectorXd c = G.transpose() * p;
  for (int k = 0; k < sys.control_dim; ++k)
    h += box_max(c(k), sys.bounds.lower(k), sys.bounds.upper(k));
  return h;
}

VectorXd optimal_control(const SystemModel& sys, const VectorXd& x, const VectorXd& p) {
  check_dim(p, sys.state_dim, "optimal_control: costate");
  VectorXd drift;
  MatrixXd G;
  control_affine(sys, x, drift, G);
  const VectorXd c = G.transpose() * p;
  VectorXd u(sys.control_dim);
  for (int k = 0; k < sys.control_dim; ++k)
    u(k) = box_argmax(c(k), sys.bounds.lower(k), sys.bounds.upper(k));
  return u;
}

HamiltonianBatch batch_hamiltonian(const SystemModel& sys, const MatrixXd& X, const MatrixXd& P) {
  const int n = static_cast<int>(X.cols());
  HamiltonianBatch out;
  out.H.resize(n);
  out.u_opt.resize(sys.control_dim, n);
  out.f_opt.resize(sys.state_dim, n);

  const VectorXd& lo = sys.bounds.lower;
  const VectorXd& hi = sys.bounds.upper;
  switch (sys.kind) {
    case SystemKind::Integrator1D:
      for (int j = 0; j < n; ++j) {
        const double u = box_argmax(P(0, j), lo(0), hi(0));
        out.u_opt(0, j) = u;
        out.f_opt(0, j) = u;
        out.H(j) = P(0, j) * u;
      }
      break;
    case SystemKind::Dubins3D:
      for (int j = 0; j < n; ++j) {
        double c, s;
        heading_trig(X(2, j), c, s);
        const double u = box_argmax(P(2, j), lo(0), hi(0));
        out.u_opt(0, j) = u;
        out.f_opt(0, j) = sys.speed * c;
        out.f_opt(1, j) = sys.speed * s;
        out.f_opt(2, j) = u;
        out.H(j) = P(0, j) * sys.speed * c + P(1, j) * sys.speed * s + P(2, j) * u;
      }
      break;
    case SystemKind::Air3D: {
      const double v = sys.speed;
      for (int j = 0; j < n; ++j) {
        double cp, sp;
        heading_trig(X(2, j), cp, sp);
        const double ca = P(0, j) * X(1, j) - P(1, j) * X(0, j) - P(2, j);
        const double cb = P(2, j);
        const double ua = box_argmax(ca, lo(0), hi(0));
        const double ub = box_argmax(cb, lo(1), hi(1));
        out.u_opt(0, j) = ua;
        out.u_opt(1, j) = ub;
        out.f_opt(0, j) = -v + v * cp + ua * X(1, j);
        out.f_opt(1, j) = v * sp - ua * X(0, j);
        out.f_opt(2, j) = ub - ua;
        out.H(j) = P.col(j).dot(out.f_opt.col(j));
      }
      break;
    }
    case SystemKind::MultiVehicle9D:
      for (int j = 0; j < n; ++j) {
        double h = 0.0;
        for (int a = 0; a < 3; ++a) {
          double c, s;
          heading_trig(X(3 * a + 2, j), c, s);
          const double u = box_argmax(P(3 * a + 2, j), lo(a), hi(a));
          out.u_opt(a, j) = u;
          out.f_opt(3 * a + 0, j) = sys.speed * c;
          out.f_opt(3 * a + 1, j) = sys.speed * s;
          out.f_opt(3 * a + 2, j) = u;
          h += P(3 * a + 0, j) * sys.speed * c + P(3 * a + 1, j) * sys.speed * s + P(3 * a + 2, j) * u;
        }
        out.H(j) = h;
      }
      break;
  }
  return out;
}

VectorXd max_flow_magnitude(const SystemModel& sys, const VectorXd& state_lo, const VectorXd& state_hi) {
  check_dim(state_lo, sys.state_dim, "max_flow_magnitude: lo");
  check_dim(state_hi, sys.state_dim, "max_flow_magnitude: hi");
  const auto umax = [&](int k) {
    return std::max(std::abs(sys.bounds.lower(k)), std::abs(sys.bounds.upper(k)));
  };
  VectorXd a(sys.state_dim);
  switch (sys.kind) {
    case SystemKind::Integrator1D:
      a(0) = umax(0);
      break;
    case SystemKind::Dubins3D:
      a(0) = sys.speed;
      a(1) = sys.speed;
      a(2) = umax(0);
      break;
    case SystemKind::Air3D: {
      const double v = sys.speed;
      const double ymax = std::max(std::abs(state_lo(1)), std::abs(state_hi(1)));
      const double xmax = std::max(std::abs(state_lo(0)), std::abs(state_hi(0)));
      a(0) = 2.0 * v + umax(0) * ymax;
      a(1) = v + umax(0) * xmax;
      a(2) = umax(0) + umax(1);
      break;
    }
    case SystemKind::MultiVehicle9D:
      for (int ag = 0; ag < 3; ++ag) {
        a(3 * ag + 0) = sys.speed;
        a(3 * ag + 1) = sys.speed;
        a(3 * ag + 2) = umax(ag);
      }
      break;
  }
  return a;
}

VectorXd rk4_step(const SystemModel& sys, const VectorXd& x, const VectorXd& u, double dt) {
  const VectorXd k1 = flow(sys, x, u);
  const VectorXd k2 = flow(sys, x + 0.5 * dt * k1, u);
  const VectorXd k3 = flow(sys, x + 0.5 * dt * k2, u);
  const VectorXd k4 = flow(sys, x + dt * k3, u);
  VectorXd next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  for (int d : sys.periodic_dims) next(d) = wrap_angle(next(d));
  return next;
}

Trajectory integrate(const SystemModel& sys, const VectorXd& x0, const Policy& policy,
                     double dt, double horizon) {
  if (dt <= 0.0) throw std::invalid_argument("integrate: dt must be positive");
  if (horizon < dt) throw std::invalid_argument("integrate: horizon must be at least dt");
  check_dim(x0, sys.state_dim, "integrate: x0");

  const int steps = static_cast<int>(std::floor(horizon / dt + 1e-9));
  Trajectory traj;
  traj.times.resize(steps + 1);
  traj.states.resize(sys.state_dim, steps + 1);
  traj.controls.resize(sys.control_dim, steps);
  traj.states.col(0) = x0;
  traj.times(0) = 0.0;

  VectorXd x = x0;
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    VectorXd u = policy(x, t);
    check_dim(u, sys.control_dim, "integrate: policy output");
    if (!sys.bounds.contains(u)) {
      u = sys.bounds.clamp(u);
      traj.control_clamped = true;
    }
    x = rk4_step(sys, x, u, dt);
    traj.controls.col(k) = u;
    traj.states.col(k + 1) = x;
    traj.times(k + 1) = (k + 1) * dt;
  }
  return traj;
}

}  // namespace rbn
