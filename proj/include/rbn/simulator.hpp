#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rbn/systems.hpp"
#include "rbn/value_provider.hpp"

namespace rbn {

struct SimConfig {
  int n_agents = 3;
  double dt = 0.01;             // s
  double trial_seconds = 60.0;
  double speed = 0.6;           // m/s
  double goal_radius = 0.3;     // m
  double collision_dist = 0.4;  // m
  int deadlock_steps = 100;          // consecutive steps before a deadlock fires
  double deadlock_threshold = 0.1;   // rad
  double deadlock_gain = 3.0;        // k; exceeds u_max so it clamps to the bound
  double deadlock_proximity = 0.8;   // m; heading test only gates nearby pairs
  int deadlock_hold_steps = 100;     // resolution command duration
  double min_initial_separation = 0.6;  // m
  // A contact episode is counted when a pair enters < collision_dist and is
  // not re-counted until it separates past collision_dist + this margin, so
  // boundary chatter within one encounter stays a single event.
  double contact_clear_margin = 0.05;
  Eigen::Vector2d domain_lo{-1.0, -1.0};
  Eigen::Vector2d domain_hi{1.0, 1.0};
  ControlBounds bounds{VectorXd::Constant(1, -1.1), VectorXd::Constant(1, 1.1)};
  std::uint64_t seed = 0;

  void validate() const;
};

struct SimMetrics {
  double collisions_per_min = 0.0;
  double in_dist_collisions_per_min = 0.0;
  double goals_per_min = 0.0;
  int deadlock_events = 0;
  double mean_min_pairwise_distance = 0.0;
  int collisions = 0;
  int in_dist_collisions = 0;
  int goals = 0;
};

enum class SimController { Nominal, LeastRestrictive, QpJoint, QpPairwise };

// Safety-filter wiring for a trial. QpJoint expects a value over the stacked
// 3*n_agents state; QpPairwise expects a relative-state (air3d) value used
// per agent against its nearest neighbor. delta shifts the value; gamma is
// both the value input and the CBF decay rate.
struct ControllerSpec {
  SimController kind = SimController::Nominal;
  BatchGradFn value;
  double gamma = 0.0;
  double delta = 0.0;
  double lr_threshold = 0.0;
  double value_tf = 1.0;  // tau slice the filter queries
};

// Proportional heading controller toward the goal, clamped to bounds.
double nominal_control(const Eigen::Vector3d& agent, const Eigen::Vector2d& goal,
                       const ControlBounds& bounds);

// True iff the last deadlock_steps entries all have wrapped heading gap below
// the threshold and distance below the proximity gate.
bool detect_deadlock(const std::vector<double>& headings_n, const std::vector<double>& headings_m,
                     const std::vector<double>& distances, const SimConfig& cfg);

// Opposed turn commands -k sgn(cross(heading, to-other)), clamped to bounds.
std::pair<double, double> resolve_deadlock(const Eigen::Vector3d& n, const Eigen::Vector3d& m,
                                           const SimConfig& cfg);

struct AgentOverride {
  double speed = 0.0;
  double turn = 0.0;
  bool active = false;
};

// Collision response: when any pair is closer than collision_dist, every
// agent stops and turns away from its nearest neighbor.
std::vector<AgentOverride> resolve_collision(const std::vector<Eigen::Vector3d>& states,
                                             const SimConfig& cfg);

struct SimTrace {
  std::vector<double> t;
  std::vector<std::vector<Eigen::Vector3d>> states;   // per step, per agent
  std::vector<std::vector<double>> controls;          // per step, per agent
  std::vector<std::vector<Eigen::Vector2d>> goals;    // per step, per agent
  std::vector<std::uint8_t> collision_mode;
  std::vector<std::uint8_t> deadlock_active;
};

std::pair<SimMetrics, SimTrace> run_trial(const SimConfig& cfg, const ControllerSpec& controller);

}  // namespace rbn
