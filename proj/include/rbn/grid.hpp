#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "rbn/systems.hpp"

namespace rbn {

// Rectilinear grid. On periodic dimensions the node at maxs is identified
// with the one at mins and not stored, so spacing = span / count there.
struct Grid {
  VectorXd mins;
  VectorXd maxs;
  Eigen::VectorXi counts;
  std::vector<std::uint8_t> periodic;

  int dims() const { return static_cast<int>(counts.size()); }
  std::int64_t num_nodes() const;
  double spacing(int d) const;
  double coordinate(int d, int i) const { return mins(d) + i * spacing(d); }
  std::vector<std::int64_t> strides() const;  // row-major, last dim fastest
  void decode(std::int64_t linear, int* idx) const;
  VectorXd node(std::int64_t linear) const;
  void validate() const;

  static Grid regular(const VectorXd& mins, const VectorXd& maxs, const Eigen::VectorXi& counts,
                      const std::vector<std::uint8_t>& periodic);
};

// A value function sampled on a grid at time-to-go tau.
struct GridValue {
  Grid grid;
  double tau = 0.0;
  double gamma = 0.0;
  VectorXd values;  // row-major over nodes
};

// Terminal slice: values = l at every node, tau = 0.
GridValue initialize(const Grid& grid, const SystemModel& sys);

// Largest stable explicit step for this grid/system (CFL 0.5).
double admissible_dt(const Grid& grid, const SystemModel& sys);

// Lax-Friedrichs numerical Hamiltonian at one node: H((D+ + D-)/2) plus
// per-dimension dissipation alpha_d (D+_d - D-_d)/2, the diffusive sign for
// the forward march in time-to-go. One-sided differences wrap on periodic
// dims and degenerate to the interior-side difference at non-periodic edges.
double numerical_hamiltonian(const GridValue& V, const SystemModel& sys, std::int64_t node);

// One explicit backward-time update of the discounted variational inequality:
// V' = min(l, V + dt (H_num + gamma V)), tau' = tau + dt. Throws if dt
// violates the CFL bound.
GridValue step(const GridValue& V, const SystemModel& sys, double gamma, double dt);

// Repeated stepping from the terminal slice, landing exactly on each
// requested snapshot time (ascending). Empty list means {horizon}.
std::vector<GridValue> solve(const Grid& grid, const SystemModel& sys, double gamma,
                             double horizon, std::vector<double> snapshot_times = {});

struct GridQuery {
  double value;
  VectorXd gradient;
};

// Multilinear interpolation of the value; gradient via central differences of
// node values, interpolated the same way. Periodic coordinates are wrapped;
// out-of-bounds non-periodic coordinates throw.
GridQuery query(const GridValue& V, const VectorXd& x);

// Clamps non-periodic coordinates into the grid box (used by value providers).
VectorXd clamp_to_grid(const Grid& grid, const VectorXd& x);

}  // namespace rbn
