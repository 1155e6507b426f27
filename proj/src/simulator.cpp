#include "rbn/simulator.hpp"

#include <cmath>
#include <stdexcept>

#include "rbn/filter.hpp"
#include "rbn/random.hpp"

namespace rbn {

namespace {

using Eigen::Vector2d;
using Eigen::Vector3d;

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double clamp_turn(double u, const ControlBounds& b) {
  return std::clamp(u, b.lower(0), b.upper(0));
}

// Turn command steering away from the other agent: -k sgn of the cross
// product between the heading vector and the vector to the other agent.
double away_turn(const Vector3d& self, const Vector2d& other, double k, const ControlBounds& b) {
  const double cross = std::cos(self(2)) * (other(1) - self(1)) -
                       std::sin(self(2)) * (other(0) - self(0));
  return clamp_turn(-k * sgn(cross), b);
}

// One RK4 step of the unicycle with scaled forward speed.
Vector3d unicycle_step(const Vector3d& x, double speed, double u, double dt) {
  const auto f = [&](const Vector3d& s) {
    return Vector3d(speed * std::cos(s(2)), speed * std::sin(s(2)), u);
  };
  const Vector3d k1 = f(x);
  const Vector3d k2 = f(x + 0.5 * dt * k1);
  const Vector3d k3 = f(x + 0.5 * dt * k2);
  const Vector3d k4 = f(x + dt * k3);
  Vector3d next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  next(2) = wrap_angle(next(2));
  return next;
}

struct PairIndex {
  int i, j;
};

std::vector<PairIndex> agent_pairs(int n) {
  std::vector<PairIndex> out;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) out.push_back({i, j});
  return out;
}

// Relative (air3d) state of agent j in agent i's frame.
Vector3d relative_state(const Vector3d& ego, const Vector3d& other) {
  const double c = std::cos(-ego(2)), s = std::sin(-ego(2));
  const double dx = other(0) - ego(0), dy = other(1) - ego(1);
  return {c * dx - s * dy, s * dx + c * dy, wrap_angle(other(2) - ego(2))};
}

}  // namespace

void SimConfig::validate() const {
  if (n_agents < 1) throw std::invalid_argument("sim: n_agents must be >= 1");
  if (!(dt > 0.0) || !(trial_seconds >= dt)) throw std::invalid_argument("sim: bad dt/horizon");
  if (!(speed > 0.0) || !(goal_radius > 0.0) || !(collision_dist > 0.0))
    throw std::invalid_argument("sim: speed, goal_radius, collision_dist must be positive");
  if (deadlock_steps < 1 || deadlock_hold_steps < 1)
    throw std::invalid_argument("sim: deadlock step counts must be >= 1");
  if (!(deadlock_threshold > 0.0) || !(deadlock_proximity > 0.0) || !(deadlock_gain > 0.0))
    throw std::invalid_argument("sim: deadlock parameters must be positive");
}

double nominal_control(const Vector3d& agent, const Vector2d& goal, const ControlBounds& bounds) {
  const double dx = goal(0) - agent(0), dy = goal(1) - agent(1);
  if (dx == 0.0 && dy == 0.0) return 0.0;
  const double target = std::atan2(dy, dx);
  const double err = std::atan2(std::sin(target - agent(2)), std::cos(target - agent(2)));
  return clamp_turn(err, bounds);
}

bool detect_deadlock(const std::vector<double>& headings_n, const std::vector<double>& headings_m,
                     const std::vector<double>& distances, const SimConfig& cfg) {
  const size_t T = static_cast<size_t>(cfg.deadlock_steps);
  if (headings_n.size() < T || headings_m.size() != headings_n.size() ||
      distances.size() != headings_n.size())
    return false;
  for (size_t k = headings_n.size() - T; k < headings_n.size(); ++k) {
    const double gap = std::abs(wrap_angle(headings_n[k] - headings_m[k]));
    if (gap >= cfg.deadlock_threshold || distances[k] >= cfg.deadlock_proximity) return false;
  }
  return true;
}

std::pair<double, double> resolve_deadlock(const Vector3d& n, const Vector3d& m,
                                           const SimConfig& cfg) {
  return {away_turn(n, m.head<2>(), cfg.deadlock_gain, cfg.bounds),
          away_turn(m, n.head<2>(), cfg.deadlock_gain, cfg.bounds)};
}

std::vector<AgentOverride> resolve_collision(const std::vector<Vector3d>& states,
                                             const SimConfig& cfg) {
  const int n = static_cast<int>(states.size());
  std::vector<AgentOverride> out(n);
  bool any = false;
  for (int i = 0; i < n && !any; ++i)
    for (int j = i + 1; j < n && !any; ++j)
      any = (states[i].head<2>() - states[j].head<2>()).norm() < cfg.collision_dist;
  if (!any) return out;

  for (int i = 0; i < n; ++i) {
    int nearest = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = (states[i].head<2>() - states[j].head<2>()).norm();
      if (d < best) {
        best = d;
        nearest = j;
      }
    }
    out[i].active = true;
    out[i].speed = 0.0;
    out[i].turn = nearest >= 0
                      ? away_turn(states[i], states[nearest].head<2>(), cfg.deadlock_gain, cfg.bounds)
                      : 0.0;
  }
  return out;
}

std::pair<SimMetrics, SimTrace> run_trial(const SimConfig& cfg, const ControllerSpec& controller) {
  cfg.validate();
  const int n = cfg.n_agents;
  const auto pairs = agent_pairs(n);
  std::mt19937_64 rng = substream(cfg.seed, "simulation");
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto sample_xy = [&] {
    return Vector2d(cfg.domain_lo(0) + (cfg.domain_hi(0) - cfg.domain_lo(0)) * unit(rng),
                    cfg.domain_lo(1) + (cfg.domain_hi(1) - cfg.domain_lo(1)) * unit(rng));
  };

  // Initial placement with pairwise separation, goals away from all agents.
  std::vector<Vector3d> agents(n);
  for (int i = 0; i < n; ++i) {
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const Vector2d p = sample_xy();
      bool ok = true;
      for (int j = 0; j < i; ++j)
        ok = ok && (p - agents[j].head<2>()).norm() >= cfg.min_initial_separation;
      if (ok) {
        agents[i].head<2>() = p;
        break;
      }
    }
    agents[i](2) = wrap_angle(-M_PI + 2.0 * M_PI * unit(rng));
  }
  std::vector<Vector2d> goals(n);
  const auto respawn_goal = [&](int i) {
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const Vector2d g = sample_xy();
      bool ok = true;
      for (int a = 0; a < n; ++a) ok = ok && (g - agents[a].head<2>()).norm() >= cfg.goal_radius;
      if (ok) {
        goals[i] = g;
        return;
      }
    }
    goals[i] = sample_xy();
  };
  for (int i = 0; i < n; ++i) respawn_goal(i);

  // Joint bounds / state for the joint filter.
  ControlBounds joint_bounds;
  joint_bounds.lower = cfg.bounds.lower(0) * VectorXd::Ones(n);
  joint_bounds.upper = cfg.bounds.upper(0) * VectorXd::Ones(n);

  SimMetrics met;
  SimTrace trace;
  const int steps = static_cast<int>(std::llround(cfg.trial_seconds / cfg.dt));

  std::vector<bool> pair_contact(pairs.size(), false);
  std::vector<int> deadlock_counter(pairs.size(), 0);
  std::vector<int> hold_left(n, 0);
  std::vector<int> hold_partner(n, -1);
  std::vector<bool> stopped(n, false);
  bool collision_mode = false;
  double min_dist_acc = 0.0;

  const auto in_domain = [&](const Vector3d& s) {
    return s(0) >= cfg.domain_lo(0) && s(0) <= cfg.domain_hi(0) && s(1) >= cfg.domain_lo(1) &&
           s(1) <= cfg.domain_hi(1);
  };

  for (int k = 0; k < steps; ++k) {
    // Pairwise distances, contact episodes, collision mode.
    double min_dist = std::numeric_limits<double>::infinity();
    bool any_below = false;
    for (size_t pi = 0; pi < pairs.size(); ++pi) {
      const double d = (agents[pairs[pi].i].head<2>() - agents[pairs[pi].j].head<2>()).norm();
      min_dist = std::min(min_dist, d);
      const bool below = d < cfg.collision_dist;
      any_below = any_below || below;
      if (below && !pair_contact[pi]) {
        ++met.collisions;
        bool all_in = true;
        for (const auto& a : agents) all_in = all_in && in_domain(a);
        if (all_in) ++met.in_dist_collisions;
        pair_contact[pi] = true;
      } else if (pair_contact[pi] && d >= cfg.collision_dist + cfg.contact_clear_margin) {
        pair_contact[pi] = false;
      }
    }
    if (n >= 2) min_dist_acc += min_dist;

    if (any_below && !collision_mode) {
      collision_mode = true;
      std::fill(stopped.begin(), stopped.end(), true);  // stop everyone on detection
    } else if (!any_below && collision_mode) {
      collision_mode = false;
      std::fill(stopped.begin(), stopped.end(), false);
    }

    // Goal captures.
    for (int i = 0; i < n; ++i) {
      if ((agents[i].head<2>() - goals[i]).norm() <= cfg.goal_radius) {
        ++met.goals;
        respawn_goal(i);
      }
    }

    std::vector<double> u(n, 0.0);
    std::vector<double> speed(n, cfg.speed);
    bool any_deadlock_hold = false;

    if (collision_mode) {
      // Stopped agents turn away from their nearest neighbor; speed returns
      // once the heading points away so the pair can actually separate.
      const auto overrides = resolve_collision(agents, cfg);
      for (int i = 0; i < n; ++i) {
        u[i] = overrides[i].turn;
        int nearest = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          const double d = (agents[i].head<2>() - agents[j].head<2>()).norm();
          if (d < best) best = d, nearest = j;
        }
        if (stopped[i] && nearest >= 0) {
          const Vector2d away = agents[i].head<2>() - agents[nearest].head<2>();
          const Vector2d heading(std::cos(agents[i](2)), std::sin(agents[i](2)));
          if (heading.dot(away) > 0.0) stopped[i] = false;
        }
        speed[i] = stopped[i] ? 0.0 : cfg.speed;
      }
      for (auto& c : deadlock_counter) c = 0;
    } else {
      // Deadlock detection on consecutive-step counters.
      for (size_t pi = 0; pi < pairs.size(); ++pi) {
        const auto [i, j] = pairs[pi];
        const double gap = std::abs(wrap_angle(agents[i](2) - agents[j](2)));
        const double d = (agents[i].head<2>() - agents[j].head<2>()).norm();
        if (gap < cfg.deadlock_threshold && d < cfg.deadlock_proximity)
          ++deadlock_counter[pi];
        else
          deadlock_counter[pi] = 0;
        if (deadlock_counter[pi] >= cfg.deadlock_steps && hold_left[i] == 0 && hold_left[j] == 0) {
          hold_left[i] = hold_left[j] = cfg.deadlock_hold_steps;
          hold_partner[i] = j;
          hold_partner[j] = i;
          ++met.deadlock_events;
          deadlock_counter[pi] = 0;
        }
      }

      // Nominal or deadlock-resolution commands.
      std::vector<double> u_nom(n);
      for (int i = 0; i < n; ++i) {
        if (hold_left[i] > 0 && hold_partner[i] >= 0) {
          u_nom[i] = away_turn(agents[i], agents[hold_partner[i]].head<2>(), cfg.deadlock_gain,
                               cfg.bounds);
          --hold_left[i];
          any_deadlock_hold = true;
        } else {
          u_nom[i] = nominal_control(agents[i], goals[i], cfg.bounds);
        }
      }

      // Safety filter.
      switch (controller.kind) {
        case SimController::Nominal:
          u = u_nom;
          break;
        case SimController::LeastRestrictive: {
          VectorXd x(3 * n);
          for (int i = 0; i < n; ++i) x.segment<3>(3 * i) = agents[i];
          const BatchEval e = controller.value(x, controller.value_tf, controller.gamma);
          if (e.value(0) - controller.delta > controller.lr_threshold) {
            u = u_nom;
          } else {
            for (int i = 0; i < n; ++i)
              u[i] = e.grad_x(3 * i + 2, 0) >= 0.0 ? cfg.bounds.upper(0) : cfg.bounds.lower(0);
          }
          break;
        }
        case SimController::QpJoint: {
          VectorXd x(3 * n);
          for (int i = 0; i < n; ++i) x.segment<3>(3 * i) = agents[i];
          const BatchEval e = controller.value(x, controller.value_tf, controller.gamma);
          const double v = e.value(0) - controller.delta;
          VectorXd a(n);
          double drift = 0.0;
          for (int i = 0; i < n; ++i) {
            a(i) = e.grad_x(3 * i + 2, 0);
            drift += e.grad_x(3 * i, 0) * cfg.speed * std::cos(agents[i](2)) +
                     e.grad_x(3 * i + 1, 0) * cfg.speed * std::sin(agents[i](2));
          }
          VectorXd un(n);
          for (int i = 0; i < n; ++i) un(i) = u_nom[i];
          const FilterResult fr =
              solve_box_qp(a, -controller.gamma * v - drift, un, joint_bounds);
          for (int i = 0; i < n; ++i) u[i] = fr.control(i);
          break;
        }
        case SimController::QpPairwise: {
          for (int i = 0; i < n; ++i) {
            if (n < 2) {
              u[i] = u_nom[i];
              continue;
            }
            int nearest = -1;
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j) {
              if (j == i) continue;
              const double d = (agents[i].head<2>() - agents[j].head<2>()).norm();
              if (d < best) best = d, nearest = j;
            }
            const Vector3d z = relative_state(agents[i], agents[nearest]);
            const BatchEval e = controller.value(z, controller.value_tf, controller.gamma);
            const double v = e.value(0) - controller.delta;
            const VectorXd g = e.grad_x.col(0);
            // ego channel coefficient and drift of the relative dynamics; the
            // neighbor's turn is assumed cooperative (maximizing).
            const double a = g(0) * z(1) - g(1) * z(0) - g(2);
            const double drift = g(0) * (-cfg.speed + cfg.speed * std::cos(z(2))) +
                                 g(1) * cfg.speed * std::sin(z(2));
            const double coop =
                std::max(g(2) * cfg.bounds.lower(0), g(2) * cfg.bounds.upper(0));
            const double b = -controller.gamma * v - drift - coop;
            const FilterResult fr = solve_box_qp(VectorXd::Constant(1, a), b,
                                                 VectorXd::Constant(1, u_nom[i]), cfg.bounds);
            u[i] = fr.control(0);
          }
          break;
        }
      }
    }

    trace.t.push_back(k * cfg.dt);
    trace.states.push_back(agents);
    trace.controls.push_back(u);
    trace.goals.push_back(goals);
    trace.collision_mode.push_back(collision_mode ? 1 : 0);
    trace.deadlock_active.push_back(any_deadlock_hold ? 1 : 0);

    for (int i = 0; i < n; ++i) agents[i] = unicycle_step(agents[i], speed[i], u[i], cfg.dt);
  }

  const double minutes = cfg.trial_seconds / 60.0;
  met.collisions_per_min = met.collisions / minutes;
  met.in_dist_collisions_per_min = met.in_dist_collisions / minutes;
  met.goals_per_min = met.goals / minutes;
  met.mean_min_pairwise_distance = n >= 2 ? min_dist_acc / steps : 0.0;
  return {met, std::move(trace)};
}

}  // namespace rbn
