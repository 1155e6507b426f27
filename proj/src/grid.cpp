#include "rbn/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rbn/threading.hpp"

namespace rbn {

namespace {

// Scalar closed-form Hamiltonian on raw buffers; the grid update calls this
// once per node, so it avoids the Eigen temporaries of hamiltonian().
double ham_local(const SystemModel& sys, const double* x, const double* p) {
  const auto bmax = [&](double c, int k) {
    return std::max(c * sys.bounds.lower(k), c * sys.bounds.upper(k));
  };
  switch (sys.kind) {
    case SystemKind::Integrator1D:
      return bmax(p[0], 0);
    case SystemKind::Dubins3D: {
      double c, s;
      heading_trig(x[2], c, s);
      return p[0] * sys.speed * c + p[1] * sys.speed * s + bmax(p[2], 0);
    }
    case SystemKind::Air3D: {
      const double v = sys.speed;
      double c, s;
      heading_trig(x[2], c, s);
      const double drift = p[0] * (-v + v * c) + p[1] * v * s;
      const double ca = p[0] * x[1] - p[1] * x[0] - p[2];
      return drift + bmax(ca, 0) + bmax(p[2], 1);
    }
    case SystemKind::MultiVehicle9D: {
      double h = 0.0;
      for (int a = 0; a < 3; ++a) {
        double c, s;
        heading_trig(x[3 * a + 2], c, s);
        h += p[3 * a] * sys.speed * c + p[3 * a + 1] * sys.speed * s + bmax(p[3 * a + 2], a);
      }
      return h;
    }
  }
  return 0.0;
}

struct StepWorkspace {
  std::vector<std::int64_t> strides;
  VectorXd alphas;
  VectorXd dx;
};

StepWorkspace make_workspace(const Grid& g, const SystemModel& sys) {
  StepWorkspace ws;
  ws.strides = g.strides();
  ws.alphas = max_flow_magnitude(sys, g.mins, g.maxs);
  ws.dx.resize(g.dims());
  for (int d = 0; d < g.dims(); ++d) ws.dx(d) = g.spacing(d);
  return ws;
}

// H_num at one node given decoded indices; writes nothing.
double lf_hamiltonian(const Grid& g, const VectorXd& vals, const SystemModel& sys,
                      const StepWorkspace& ws, std::int64_t lin, const int* idx) {
  double x[16];
  double pbar[16];
  double dissipation = 0.0;
  for (int d = 0; d < g.dims(); ++d) {
    const int c = g.counts(d);
    const std::int64_t s = ws.strides[d];
    const bool per = g.periodic[d] != 0;

    // Zero-gradient ghost cells outside non-periodic edges: the missing
    // one-sided difference is 0, which keeps the scheme monotone there.
    double dplus = 0.0, dminus = 0.0;
    if (idx[d] + 1 < c)
      dplus = (vals(lin + s) - vals(lin)) / ws.dx(d);
    else if (per)
      dplus = (vals(lin - std::int64_t(c - 1) * s) - vals(lin)) / ws.dx(d);
    if (idx[d] > 0)
      dminus = (vals(lin) - vals(lin - s)) / ws.dx(d);
    else if (per)
      dminus = (vals(lin) - vals(lin + std::int64_t(c - 1) * s)) / ws.dx(d);

    x[d] = g.coordinate(d, idx[d]);
    pbar[d] = 0.5 * (dplus + dminus);
    dissipation += ws.alphas(d) * 0.5 * (dplus - dminus);
  }
  // Dissipation enters with + because the update marches forward in
  // time-to-go (V' = V + dt H_num); this is what makes the scheme monotone
  // under the CFL bound.
  return ham_local(sys, x, pbar) + dissipation;
}

void step_into(const GridValue& V, const SystemModel& sys, const VectorXd& l,
               const StepWorkspace& ws, double gamma, double dt, VectorXd& out) {
  const Grid& g = V.grid;
  out.resize(V.values.size());
  parallel_for(g.num_nodes(), [&](std::int64_t lin) {
    int idx[16];
    g.decode(lin, idx);
    const double h = lf_hamiltonian(g, V.values, sys, ws, lin, idx);
    const double v = V.values(lin);
    out(lin) = std::min(l(lin), v + dt * (h + gamma * v));
  });
}

}  // namespace

std::int64_t Grid::num_nodes() const {
  std::int64_t n = 1;
  for (int d = 0; d < dims(); ++d) n *= counts(d);
  return n;
}

double Grid::spacing(int d) const {
  const double span = maxs(d) - mins(d);
  return periodic[d] ? span / counts(d) : span / (counts(d) - 1);
}

std::vector<std::int64_t> Grid::strides() const {
  std::vector<std::int64_t> s(dims());
  std::int64_t acc = 1;
  for (int d = dims() - 1; d >= 0; --d) {
    s[d] = acc;
    acc *= counts(d);
  }
  return s;
}

void Grid::decode(std::int64_t linear, int* idx) const {
  for (int d = dims() - 1; d >= 0; --d) {
    idx[d] = static_cast<int>(linear % counts(d));
    linear /= counts(d);
  }
}

VectorXd Grid::node(std::int64_t linear) const {
  int idx[16];
  decode(linear, idx);
  VectorXd x(dims());
  for (int d = 0; d < dims(); ++d) x(d) = coordinate(d, idx[d]);
  return x;
}

void Grid::validate() const {
  const int nd = dims();
  if (nd < 1 || nd > 16) throw std::invalid_argument("grid: dims must be in [1, 16]");
  if (mins.size() != nd || maxs.size() != nd || static_cast<int>(periodic.size()) != nd)
    throw std::invalid_argument("grid: field sizes disagree");
  for (int d = 0; d < nd; ++d) {
    if (counts(d) < 3) throw std::invalid_argument("grid: counts must be >= 3");
    if (!(mins(d) < maxs(d))) throw std::invalid_argument("grid: mins must be < maxs");
    if (!std::isfinite(mins(d)) || !std::isfinite(maxs(d)))
      throw std::invalid_argument("grid: bounds must be finite");
  }
}

Grid Grid::regular(const VectorXd& mins, const VectorXd& maxs, const Eigen::VectorXi& counts,
                   const std::vector<std::uint8_t>& periodic) {
  Grid g{mins, maxs, counts, periodic};
  g.validate();
  return g;
}

GridValue initialize(const Grid& grid, const SystemModel& sys) {
  grid.validate();
  if (grid.dims() != sys.state_dim)
    throw std::invalid_argument("initialize: grid dims must match the system state dimension");
  GridValue gv;
  gv.grid = grid;
  gv.tau = 0.0;
  gv.values.resize(grid.num_nodes());
  parallel_for(grid.num_nodes(), [&](std::int64_t lin) {
    gv.values(lin) = boundary(sys, grid.node(lin));
  });
  return gv;
}

double admissible_dt(const Grid& grid, const SystemModel& sys) {
  const VectorXd alphas = max_flow_magnitude(sys, grid.mins, grid.maxs);
  double m = std::numeric_limits<double>::infinity();
  for (int d = 0; d < grid.dims(); ++d)
    if (alphas(d) > 0.0) m = std::min(m, grid.spacing(d) / alphas(d));
  return 0.5 * m / grid.dims();
}

double numerical_hamiltonian(const GridValue& V, const SystemModel& sys, std::int64_t node) {
  const StepWorkspace ws = make_workspace(V.grid, sys);
  int idx[16];
  V.grid.decode(node, idx);
  return lf_hamiltonian(V.grid, V.values, sys, ws, node, idx);
}

GridValue step(const GridValue& V, const SystemModel& sys, double gamma, double dt) {
  const double dt_max = admissible_dt(V.grid, sys);
  if (dt > dt_max * (1.0 + 1e-12))
    throw std::runtime_error("step: dt " + std::to_string(dt) +
                             " violates the CFL bound; admissible dt <= " + std::to_string(dt_max));
  const GridValue l = initialize(V.grid, sys);
  const StepWorkspace ws = make_workspace(V.grid, sys);
  GridValue out;
  out.grid = V.grid;
  out.tau = V.tau + dt;
  out.gamma = gamma;
  step_into(V, sys, l.values, ws, gamma, dt, out.values);
  return out;
}

std::vector<GridValue> solve(const Grid& grid, const SystemModel& sys, double gamma,
                             double horizon, std::vector<double> snapshot_times) {
  if (!(horizon > 0.0)) throw std::invalid_argument("solve: horizon must be positive");
  if (snapshot_times.empty()) snapshot_times = {horizon};
  std::sort(snapshot_times.begin(), snapshot_times.end());
  for (double t : snapshot_times)
    if (t < 0.0 || t > horizon + 1e-12)
      throw std::invalid_argument("solve: snapshot times must lie in [0, horizon]");

  const double dt_max = admissible_dt(grid, sys);
  const StepWorkspace ws = make_workspace(grid, sys);
  GridValue cur = initialize(grid, sys);
  const VectorXd l = cur.values;
  cur.gamma = gamma;

  std::vector<GridValue> out;
  VectorXd next(cur.values.size());
  for (double target : snapshot_times) {
    if (target > cur.tau + 1e-15) {
      const int n = std::max(1, static_cast<int>(std::ceil((target - cur.tau) / dt_max - 1e-12)));
      const double dt = (target - cur.tau) / n;
      for (int k = 0; k < n; ++k) {
        step_into(cur, sys, l, ws, gamma, dt, next);
        cur.values.swap(next);
      }
      cur.tau = target;
    }
    out.push_back(cur);
  }
  return out;
}

VectorXd clamp_to_grid(const Grid& grid, const VectorXd& x) {
  VectorXd y = x;
  for (int d = 0; d < grid.dims(); ++d)
    if (!grid.periodic[d]) y(d) = std::clamp(y(d), grid.mins(d), grid.maxs(d));
  return y;
}

namespace {

// Central-difference gradient of the node field in dimension d, one-sided at
// non-periodic edges.
double node_gradient(const Grid& g, const VectorXd& vals, const std::vector<std::int64_t>& strides,
                     std::int64_t lin, const int* idx, int d) {
  const int c = g.counts(d);
  const std::int64_t s = strides[d];
  const double dx = g.spacing(d);
  const bool per = g.periodic[d] != 0;
  const std::int64_t up = idx[d] + 1 < c ? lin + s : (per ? lin - std::int64_t(c - 1) * s : -1);
  const std::int64_t dn = idx[d] > 0 ? lin - s : (per ? lin + std::int64_t(c - 1) * s : -1);
  if (up >= 0 && dn >= 0) return (vals(up) - vals(dn)) / (2.0 * dx);
  if (up >= 0) return (vals(up) - vals(lin)) / dx;
  return (vals(lin) - vals(dn)) / dx;
}

}  // namespace

GridQuery query(const GridValue& V, const VectorXd& x) {
  const Grid& g = V.grid;
  if (x.size() != g.dims()) throw std::invalid_argument("query: point dimension mismatch");
  const auto strides = g.strides();

  int base[16];
  double frac[16];
  for (int d = 0; d < g.dims(); ++d) {
    const double dx = g.spacing(d);
    double xd = x(d);
    if (g.periodic[d]) {
      const double span = g.maxs(d) - g.mins(d);
      xd = std::fmod(xd - g.mins(d), span);
      if (xd < 0.0) xd += span;
      xd += g.mins(d);
    } else if (xd < g.mins(d) - 1e-12 || xd > g.maxs(d) + 1e-12) {
      throw std::out_of_range("query: coordinate " + std::to_string(d) + " = " + std::to_string(xd) +
                              " outside grid bounds");
    }
    double u = (xd - g.mins(d)) / dx;
    const int hi_cell = g.periodic[d] ? g.counts(d) - 1 : g.counts(d) - 2;
    int i0 = static_cast<int>(std::floor(u));
    i0 = std::clamp(i0, 0, hi_cell);
    frac[d] = std::clamp(u - i0, 0.0, 1.0);
    base[d] = i0;
  }

  GridQuery out;
  out.value = 0.0;
  out.gradient = VectorXd::Zero(g.dims());
  const int corners = 1 << g.dims();
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    std::int64_t lin = 0;
    int idx[16];
    for (int d = 0; d < g.dims(); ++d) {
      const bool upper = (c >> d) & 1;
      int i = base[d] + (upper ? 1 : 0);
      if (i == g.counts(d)) i = 0;  // periodic wrap of the upper corner
      idx[d] = i;
      lin += i * strides[d];
      w *= upper ? frac[d] : 1.0 - frac[d];
    }
    if (w == 0.0) continue;
    out.value += w * V.values(lin);
    for (int d = 0; d < g.dims(); ++d)
      out.gradient(d) += w * node_gradient(g, V.values, strides, lin, idx, d);
  }
  return out;
}

}  // namespace rbn
