#include "rbn/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "rbn/conformal.hpp"
#include "rbn/filter.hpp"
#include "rbn/grid.hpp"
#include "rbn/io.hpp"
#include "rbn/metrics.hpp"
#include "rbn/network.hpp"
#include "rbn/random.hpp"
#include "rbn/simulator.hpp"
#include "rbn/threading.hpp"
#include "rbn/training.hpp"
#include "rbn/value_provider.hpp"

namespace rbn {

namespace {

using nlohmann::json;

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  return json::parse(read_file(path));
}

// Flags beat config-file values; anything untouched keeps its default.
template <typename T>
void merge(json& cfg, const std::string& key, const T& flag_value, bool flag_given) {
  if (flag_given)
    cfg[key] = flag_value;
  else if (!cfg.contains(key))
    cfg[key] = flag_value;
}

SystemModel system_from_config(const json& cfg) {
  json sys_cfg = cfg.contains("system") ? cfg["system"] : json::object();
  if (!sys_cfg.contains("name")) throw std::runtime_error("no system name given");
  return system_from_json(sys_cfg.dump());
}

Eigen::VectorXi parse_counts(const std::string& spec) {
  Eigen::VectorXi counts;
  std::vector<int> c;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, 'x')) c.push_back(std::stoi(tok));
  counts.resize(c.size());
  for (size_t i = 0; i < c.size(); ++i) counts(i) = c[i];
  return counts;
}

Grid grid_for_system(const SystemModel& sys, const Eigen::VectorXi& counts) {
  std::vector<std::uint8_t> per(sys.state_dim, 0);
  for (int d : sys.periodic_dims) per[d] = 1;
  return Grid::regular(sys.domain_lo, sys.domain_hi, counts, per);
}

std::string default_counts(const SystemModel& sys) {
  switch (sys.kind) {
    case SystemKind::Integrator1D:
      return "201";
    case SystemKind::Dubins3D:
      return "61x61x41";
    case SystemKind::Air3D:
      return "81x81x61";
    case SystemKind::MultiVehicle9D:
      return "";
  }
  return "";
}

struct LoadedValue {
  BatchGradFn grad_fn;
  BatchValueFn value_fn;
  double t_f = 1.0;
  SystemModel system;
  bool is_net = false;
  ValueNet net;  // populated when is_net
};

LoadedValue load_value_file(const std::string& path) {
  const std::string head = read_file(path).substr(0, 8);
  LoadedValue lv;
  if (head.rfind("RBNGRID1", 0) == 0) {
    GridFile gf = read_grid_value(path);
    lv.grad_fn = make_batch_grad_fn(gf.value);
    lv.value_fn = make_batch_value_fn(gf.value);
    lv.t_f = gf.value.tau;
    lv.system = make_system("dubins3d");  // not used by grid providers
  } else if (head.rfind("RBNNET1", 0) == 0) {
    NetFile nf = read_value_net(path);
    lv.grad_fn = make_batch_grad_fn(nf.net);
    lv.value_fn = make_batch_value_fn(nf.net);
    lv.t_f = nf.net.t_f;
    lv.system = nf.net.system;
    lv.is_net = true;
    lv.net = std::move(nf.net);
  } else {
    throw std::runtime_error(path + ": unrecognized value file");
  }
  return lv;
}

TrainConfig train_config_from_json(const json& cfg) {
  TrainConfig tc;
  const auto get = [&](const char* key, auto& field) {
    if (cfg.contains(key)) field = cfg[key].get<std::decay_t<decltype(field)>>();
  };
  get("epochs", tc.epochs);
  get("pretrain_epochs", tc.pretrain_epochs);
  get("samples_per_epoch", tc.samples_per_epoch);
  get("learning_rate", tc.learning_rate);
  get("gamma_min", tc.gamma_min);
  get("gamma_max", tc.gamma_max);
  get("t_f", tc.t_f);
  get("beta1", tc.beta1);
  get("beta2", tc.beta2);
  get("eps_adam", tc.eps_adam);
  get("seed", tc.seed);
  get("hidden_layers", tc.hidden_layers);
  get("hidden_size", tc.hidden_size);
  get("omega0", tc.omega0);
  get("checkpoint_interval", tc.checkpoint_interval);
  get("report_stride", tc.report_stride);
  return tc;
}

json train_config_to_json(const TrainConfig& tc) {
  json j;
  j["epochs"] = tc.epochs;
  j["pretrain_epochs"] = tc.pretrain_epochs;
  j["samples_per_epoch"] = tc.samples_per_epoch;
  j["learning_rate"] = tc.learning_rate;
  j["gamma_min"] = tc.gamma_min;
  j["gamma_max"] = tc.gamma_max;
  j["t_f"] = tc.t_f;
  j["beta1"] = tc.beta1;
  j["beta2"] = tc.beta2;
  j["eps_adam"] = tc.eps_adam;
  j["seed"] = tc.seed;
  j["hidden_layers"] = tc.hidden_layers;
  j["hidden_size"] = tc.hidden_size;
  j["omega0"] = tc.omega0;
  j["checkpoint_interval"] = tc.checkpoint_interval;
  j["report_stride"] = tc.report_stride;
  return j;
}

int cmd_solve_grid(const json& resolved) {
  const SystemModel sys = system_from_config(resolved);
  if (sys.kind == SystemKind::MultiVehicle9D)
    throw std::runtime_error("solve-grid: 9D grids are not supported (dimensionality)");
  const Eigen::VectorXi counts = parse_counts(resolved["grid"].get<std::string>());
  if (counts.size() != sys.state_dim)
    throw std::runtime_error("solve-grid: grid spec rank does not match the system");
  const Grid grid = grid_for_system(sys, counts);
  const double gamma = resolved["gamma"].get<double>();
  const double horizon = resolved["horizon"].get<double>();
  std::vector<double> snaps;
  if (resolved.contains("snapshots"))
    for (const auto& s : resolved["snapshots"]) snaps.push_back(s.get<double>());

  const auto slices = solve(grid, sys, gamma, horizon, snaps);
  const std::string out = resolved["out"].get<std::string>();
  if (slices.size() == 1) {
    write_grid_value(out, slices.back(), resolved.dump());
  } else {
    for (size_t i = 0; i < slices.size(); ++i)
      write_grid_value(out + ".tau" + std::to_string(i), slices[i], resolved.dump());
    write_grid_value(out, slices.back(), resolved.dump());
  }
  std::cout << "wrote " << out << " (tau = " << slices.back().tau << ", gamma = " << gamma << ")\n";
  return 0;
}

int cmd_train(const json& resolved) {
  const SystemModel sys = system_from_config(resolved);
  TrainConfig tc = train_config_from_json(resolved["train"]);
  tc.validate();
  ValueNet net = make_value_net(sys, tc.hidden_layers, tc.hidden_size,
                                splitmix64(tc.seed ^ hash_str("init")), tc.t_f, tc.gamma_min,
                                tc.gamma_max, tc.omega0);
  auto [trained, report] = train(sys, std::move(net), tc);
  const std::string out = resolved["out"].get<std::string>();
  write_value_net(out, trained, resolved.dump());

  if (resolved.contains("report")) {
    std::string csv = "# config " + resolved.dump() + "\n";
    csv += "epoch,loss,progress,seconds\n";
    char line[160];
    for (size_t i = 0; i < report.epoch.size(); ++i) {
      std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.3f\n", report.epoch[i], report.loss[i],
                    report.progress[i], report.seconds[i]);
      csv += line;
    }
    atomic_write(resolved["report"].get<std::string>(), csv);
  }
  std::cout << "wrote " << out << " (final loss " << report.loss.back() << ", pretrain "
            << report.pretrain_eval_before << " -> " << report.pretrain_eval_after << ")\n";
  return 0;
}

int cmd_calibrate(const json& resolved) {
  LoadedValue lv = load_value_file(resolved["net"].get<std::string>());
  if (!lv.is_net) throw std::runtime_error("calibrate: requires a net checkpoint");
  std::vector<double> gammas, epsilons;
  for (const auto& g : resolved["gamma"]) gammas.push_back(g.get<double>());
  for (const auto& e : resolved["epsilon"]) epsilons.push_back(e.get<double>());
  const int n = resolved["n"].get<int>();
  const double horizon = resolved["horizon"].get<double>();
  const double dt = resolved["dt"].get<double>();
  const std::uint64_t seed = resolved["seed"].get<std::uint64_t>();

  const auto curves = curve(lv.net, gammas, epsilons, n, horizon, dt, seed);

  std::string csv = "# config " + resolved.dump() + "\n";
  csv += "gamma,epsilon,delta,n,safe_volume_fraction\n";
  char line[160];
  for (const auto& c : curves)
    for (size_t i = 0; i < c.epsilon.size(); ++i) {
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%d,%.17g\n", c.gamma, c.epsilon[i],
                    c.delta[i], c.n, c.safe_volume_fraction[i]);
      csv += line;
    }
  const std::string out = resolved["out"].get<std::string>();
  atomic_write(out, csv);

  if (resolved.contains("records")) {
    std::string rc = "# config " + resolved.dump() + "\n";
    for (int d = 0; d < lv.system.state_dim; ++d) rc += "x" + std::to_string(d) + ",";
    rc += "gamma,predicted,realized_cost,score\n";
    for (size_t gi = 0; gi < gammas.size(); ++gi) {
      std::mt19937_64 rng = substream(seed, "conformal.collect", gi);
      const auto records = collect(lv.net, gammas[gi], n, horizon, dt, rng);
      for (const auto& r : records) {
        for (int d = 0; d < r.x0.size(); ++d) {
          std::snprintf(line, sizeof line, "%.17g,", r.x0(d));
          rc += line;
        }
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g\n", r.gamma, r.predicted,
                      r.realized_cost, r.score);
        rc += line;
      }
    }
    atomic_write(resolved["records"].get<std::string>(), rc);
  }
  std::cout << "wrote " << out << "\n";
  for (const auto& c : curves)
    for (size_t i = 0; i < c.epsilon.size(); ++i)
      std::cout << "gamma " << c.gamma << " epsilon " << c.epsilon[i] << " -> delta "
                << c.delta[i] << " (safe volume " << c.safe_volume_fraction[i] << ")\n";
  return 0;
}

int cmd_rollout_eval(const json& resolved) {
  LoadedValue lv = load_value_file(resolved["value"].get<std::string>());
  const SystemModel sys =
      lv.is_net ? lv.system : system_from_json(resolved["system"].dump());
  const double gamma = resolved["gamma"].get<double>();
  const double delta = resolved["delta"].get<double>();
  const int n = resolved["n"].get<int>();
  const double horizon = resolved["horizon"].get<double>();
  const double dt = resolved["dt"].get<double>();
  const std::uint64_t seed = resolved["seed"].get<std::uint64_t>();
  const std::string policy = resolved["policy"].get<std::string>();
  const RolloutPolicyKind kind = policy == "qp" ? RolloutPolicyKind::QpFilteredNominal
                                                : RolloutPolicyKind::LearnedOptimal;

  const RolloutClassification rc =
      classify_rollouts(sys, lv.grad_fn, lv.t_f, kind, n, horizon, dt, gamma, delta, seed);
  json out;
  out["config"] = resolved;
  out["fpr"] = rc.fpr;
  out["fnr"] = rc.fnr;
  out["cc"] = rc.cc;
  out["n"] = rc.n;
  std::cout << "FPR " << 100.0 * rc.fpr << "%  FNR " << 100.0 * rc.fnr << "%  CC "
            << 100.0 * rc.cc << "%  (n = " << rc.n << ")\n";
  if (resolved.contains("out")) atomic_write(resolved["out"].get<std::string>(), out.dump(2) + "\n");
  return 0;
}

int cmd_compare_sets(const json& resolved) {
  GridFile truth = read_grid_value(resolved["truth"].get<std::string>());
  LoadedValue learned = load_value_file(resolved["learned"].get<std::string>());
  const double gamma = resolved["gamma"].get<double>();
  const double level = resolved["level"].get<double>();

  const Grid& g = truth.value.grid;
  MatrixXd points(g.dims(), g.num_nodes());
  for (std::int64_t i = 0; i < g.num_nodes(); ++i) points.col(i) = g.node(i);

  const SetComparison sc = compare_sets(make_batch_value_fn(truth.value), learned.value_fn,
                                        points, truth.value.tau, gamma, level);
  json out;
  out["config"] = resolved;
  out["iou"] = sc.iou;
  out["fi"] = sc.fi;
  out["fe"] = sc.fe;
  out["n_points"] = sc.n_points;
  out["degenerate"] = sc.degenerate;
  std::cout << "IOU " << 100.0 * sc.iou << "%  FI " << 100.0 * sc.fi << "%  FE "
            << 100.0 * sc.fe << "%  (n = " << sc.n_points << ", level = " << level << ")\n";
  if (resolved.contains("out")) atomic_write(resolved["out"].get<std::string>(), out.dump(2) + "\n");
  return 0;
}

int cmd_simulate(const json& resolved) {
  SimConfig cfg;
  cfg.n_agents = resolved["agents"].get<int>();
  cfg.trial_seconds = resolved["trial_seconds"].get<double>();
  cfg.speed = resolved["v"].get<double>();
  const std::uint64_t master = resolved["seed"].get<std::uint64_t>();
  const int trials = resolved["trials"].get<int>();

  ControllerSpec spec;
  spec.gamma = resolved["gamma"].get<double>();
  spec.delta = resolved["delta"].get<double>();
  const std::string ckind = resolved["controller"].get<std::string>();
  if (ckind == "nominal") {
    spec.kind = SimController::Nominal;
  } else {
    LoadedValue lv = load_value_file(resolved["value"].get<std::string>());
    spec.value = lv.grad_fn;
    spec.value_tf = lv.t_f;
    // A net backs the joint filter over the stacked state; a grid backs the
    // pairwise relative-state filter.
    if (lv.is_net && lv.system.state_dim != 3 * cfg.n_agents)
      throw std::runtime_error("simulate: net models a " +
                               std::to_string(lv.system.state_dim) +
                               "-dimensional state but the joint filter for " +
                               std::to_string(cfg.n_agents) + " agents needs " +
                               std::to_string(3 * cfg.n_agents));
    if (ckind == "lr") {
      spec.kind = SimController::LeastRestrictive;
      spec.lr_threshold = resolved["lr_threshold"].get<double>();
    } else if (ckind == "qp") {
      spec.kind = lv.is_net ? SimController::QpJoint : SimController::QpPairwise;
    } else {
      throw std::runtime_error("simulate: unknown controller " + ckind);
    }
  }

  std::vector<SimMetrics> per_trial(trials);
  std::vector<SimTrace> traces(trials);
  parallel_for(trials, [&](std::int64_t t) {
    SimConfig c = cfg;
    c.seed = splitmix64(master + static_cast<std::uint64_t>(t));
    auto [m, tr] = run_trial(c, spec);
    per_trial[t] = m;
    traces[t] = std::move(tr);
  });

  SimMetrics agg;
  for (const auto& m : per_trial) {
    agg.collisions += m.collisions;
    agg.in_dist_collisions += m.in_dist_collisions;
    agg.goals += m.goals;
    agg.deadlock_events += m.deadlock_events;
    agg.mean_min_pairwise_distance += m.mean_min_pairwise_distance / trials;
  }
  const double minutes = trials * cfg.trial_seconds / 60.0;
  agg.collisions_per_min = agg.collisions / minutes;
  agg.in_dist_collisions_per_min = agg.in_dist_collisions / minutes;
  agg.goals_per_min = agg.goals / minutes;

  json out;
  out["config"] = resolved;
  out["collisions_per_min"] = agg.collisions_per_min;
  out["in_dist_collisions_per_min"] = agg.in_dist_collisions_per_min;
  out["goals_per_min"] = agg.goals_per_min;
  out["deadlock_events"] = agg.deadlock_events;
  out["mean_min_pairwise_distance"] = agg.mean_min_pairwise_distance;
  out["trials"] = trials;
  std::cout << "collisions/min " << agg.collisions_per_min << "  in-dist/min "
            << agg.in_dist_collisions_per_min << "  goals/min " << agg.goals_per_min
            << "  deadlocks " << agg.deadlock_events << "  mean min dist "
            << agg.mean_min_pairwise_distance << "\n";
  if (resolved.contains("metrics"))
    atomic_write(resolved["metrics"].get<std::string>(), out.dump(2) + "\n");

  if (resolved.contains("trace")) {
    const SimTrace& tr = traces.front();
    std::string csv = "# config " + resolved.dump() + "\n";
    csv += "t";
    for (int i = 0; i < cfg.n_agents; ++i) {
      const std::string s = std::to_string(i);
      csv += ",x" + s + ",y" + s + ",theta" + s + ",u" + s + ",goal_x" + s + ",goal_y" + s;
    }
    csv += ",collision_mode,deadlock_active\n";
    char num[64];
    for (size_t k = 0; k < tr.t.size(); ++k) {
      std::snprintf(num, sizeof num, "%.4f", tr.t[k]);
      csv += num;
      for (int i = 0; i < cfg.n_agents; ++i) {
        std::snprintf(num, sizeof num, ",%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", tr.states[k][i](0),
                      tr.states[k][i](1), tr.states[k][i](2), tr.controls[k][i],
                      tr.goals[k][i](0), tr.goals[k][i](1));
        csv += num;
      }
      csv += "," + std::to_string(int(tr.collision_mode[k])) + "," +
             std::to_string(int(tr.deadlock_active[k])) + "\n";
    }
    atomic_write(resolved["trace"].get<std::string>(), csv);
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"reachability barrier network toolkit"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "worker thread cap (1 = sequential reference mode)");

  // Shared option capture; each subcommand records what was actually set and
  // the resolved config is embedded into every artifact it writes.
  std::string config_path, system_name, out_path, grid_spec, report_path, records_path;
  std::string value_path, truth_path, learned_path, policy = "learned", controller = "nominal";
  std::string trace_path, metrics_path;
  double gamma = 0.0, horizon = 1.0, level = 0.0, delta = 0.0, dt = 0.01, lr_threshold = 0.0;
  double v_override = 0.0, u_max = 0.0, obstacle_radius = 0.0, collision_radius = 0.0;
  double trial_seconds = 60.0, sim_speed = 0.6;
  std::vector<double> gammas, epsilons, snapshots;
  std::uint64_t seed = 0;
  int n = 1000, trials = 5, agents = 3;
  int epochs = 0, pretrain = -1, samples = 0, hidden_size = 0, hidden_layers = 0;
  double lr = 0.0;

  auto* sg = app.add_subcommand("solve-grid", "dynamic-programming value on a grid");
  sg->add_option("--system", system_name)->required();
  sg->add_option("--gamma", gamma);
  sg->add_option("--horizon", horizon);
  sg->add_option("--grid", grid_spec);
  sg->add_option("--snapshots", snapshots);
  sg->add_option("--out", out_path);
  sg->add_option("--config", config_path);
  sg->add_option("--v", v_override);
  sg->add_option("--u-max", u_max);
  sg->add_option("--obstacle-radius", obstacle_radius);
  sg->add_option("--collision-radius", collision_radius);
  sg->add_option("--seed", seed);

  auto* tr = app.add_subcommand("train", "self-supervised value-network training");
  tr->add_option("--system", system_name)->required();
  tr->add_option("--config", config_path);
  tr->add_option("--out", out_path);
  tr->add_option("--report", report_path);
  tr->add_option("--epochs", epochs);
  tr->add_option("--pretrain-epochs", pretrain);
  tr->add_option("--samples", samples);
  tr->add_option("--lr", lr);
  tr->add_option("--hidden-size", hidden_size);
  tr->add_option("--hidden-layers", hidden_layers);
  tr->add_option("--seed", seed);

  auto* ca = app.add_subcommand("calibrate", "conformal delta calibration");
  ca->add_option("--net", value_path)->required();
  ca->add_option("--gamma", gammas);
  ca->add_option("--epsilon", epsilons);
  ca->add_option("--n", n);
  ca->add_option("--horizon", horizon);
  ca->add_option("--dt", dt);
  ca->add_option("--out", out_path);
  ca->add_option("--records", records_path);
  ca->add_option("--seed", seed);
  ca->add_option("--config", config_path);

  auto* re = app.add_subcommand("rollout-eval", "FPR/FNR/CC rollout classification");
  re->add_option("--value", value_path)->required();
  re->add_option("--gamma", gamma);
  re->add_option("--delta", delta);
  re->add_option("--n", n);
  re->add_option("--horizon", horizon);
  re->add_option("--dt", dt);
  re->add_option("--policy", policy)->check(CLI::IsMember({"learned", "qp"}));
  re->add_option("--seed", seed);
  re->add_option("--out", out_path);
  re->add_option("--config", config_path);

  auto* cs = app.add_subcommand("compare-sets", "IOU/FI/FE against a ground-truth grid");
  cs->add_option("--truth", truth_path)->required();
  cs->add_option("--learned", learned_path)->required();
  cs->add_option("--gamma", gamma);
  cs->add_option("--level", level);
  cs->add_option("--out", out_path);
  cs->add_option("--config", config_path);

  auto* si = app.add_subcommand("simulate", "multi-agent goal-seeking trials");
  si->add_option("--controller", controller)->check(CLI::IsMember({"nominal", "lr", "qp"}));
  si->add_option("--net", value_path);
  si->add_option("--grid", truth_path);
  si->add_option("--gamma", gamma);
  si->add_option("--delta", delta);
  si->add_option("--lr-threshold", lr_threshold);
  si->add_option("--trials", trials);
  si->add_option("--agents", agents);
  si->add_option("--trial-seconds", trial_seconds);
  si->add_option("--v", sim_speed);
  si->add_option("--seed", seed);
  si->add_option("--trace", trace_path);
  si->add_option("--metrics", metrics_path);
  si->add_option("--config", config_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  set_thread_count(threads);

  try {
    json cfg = load_config(config_path);
    if (app.got_subcommand(sg)) {
      json sys_cfg = cfg.contains("system") ? cfg["system"] : json::object();
      sys_cfg["name"] = system_name;
      SystemModel base = system_from_json(sys_cfg.dump());
      if (sg->count("--v")) sys_cfg["v"] = v_override;
      if (sg->count("--u-max")) {
        sys_cfg["u_min"] = std::vector<double>(base.control_dim, -u_max);
        sys_cfg["u_max"] = std::vector<double>(base.control_dim, u_max);
      }
      if (sg->count("--obstacle-radius")) sys_cfg["obstacle_radius"] = obstacle_radius;
      if (sg->count("--collision-radius")) sys_cfg["collision_radius"] = collision_radius;
      cfg["system"] = sys_cfg;
      merge(cfg, "gamma", gamma, sg->count("--gamma") > 0);
      merge(cfg, "horizon", horizon, sg->count("--horizon") > 0);
      merge(cfg, "grid", grid_spec.empty() ? default_counts(system_from_config(cfg)) : grid_spec,
            sg->count("--grid") > 0);
      merge(cfg, "out", out_path.empty() ? "value.grid" : out_path, sg->count("--out") > 0);
      merge(cfg, "seed", seed, sg->count("--seed") > 0);
      if (!snapshots.empty()) cfg["snapshots"] = snapshots;
      cfg["command"] = "solve-grid";
      return cmd_solve_grid(cfg);
    }
    if (app.got_subcommand(tr)) {
      json sys_cfg = cfg.contains("system") ? cfg["system"] : json::object();
      sys_cfg["name"] = system_name;
      cfg["system"] = sys_cfg;
      json tj = cfg.contains("train") ? cfg["train"] : json::object();
      TrainConfig base = train_config_from_json(tj);
      if (tr->count("--epochs")) base.epochs = epochs;
      if (tr->count("--pretrain-epochs")) base.pretrain_epochs = pretrain;
      if (tr->count("--samples")) base.samples_per_epoch = samples;
      if (tr->count("--lr")) base.learning_rate = lr;
      if (tr->count("--hidden-size")) base.hidden_size = hidden_size;
      if (tr->count("--hidden-layers")) base.hidden_layers = hidden_layers;
      if (tr->count("--seed")) base.seed = seed;
      cfg["train"] = train_config_to_json(base);
      merge(cfg, "out", out_path.empty() ? "net.ckpt" : out_path, tr->count("--out") > 0);
      if (!report_path.empty()) cfg["report"] = report_path;
      cfg["command"] = "train";
      return cmd_train(cfg);
    }
    if (app.got_subcommand(ca)) {
      cfg["net"] = value_path;
      if (!gammas.empty() || !cfg.contains("gamma"))
        cfg["gamma"] = gammas.empty() ? std::vector<double>{0.0} : gammas;
      if (!epsilons.empty() || !cfg.contains("epsilon"))
        cfg["epsilon"] = epsilons.empty() ? std::vector<double>{0.01} : epsilons;
      merge(cfg, "n", n, ca->count("--n") > 0);
      merge(cfg, "horizon", horizon, ca->count("--horizon") > 0);
      merge(cfg, "dt", dt, ca->count("--dt") > 0);
      merge(cfg, "seed", seed, ca->count("--seed") > 0);
      merge(cfg, "out", out_path.empty() ? "curve.csv" : out_path, ca->count("--out") > 0);
      if (!records_path.empty()) cfg["records"] = records_path;
      cfg["command"] = "calibrate";
      return cmd_calibrate(cfg);
    }
    if (app.got_subcommand(re)) {
      cfg["value"] = value_path;
      merge(cfg, "gamma", gamma, re->count("--gamma") > 0);
      merge(cfg, "delta", delta, re->count("--delta") > 0);
      merge(cfg, "n", n, re->count("--n") > 0);
      merge(cfg, "horizon", horizon, re->count("--horizon") > 0);
      merge(cfg, "dt", dt, re->count("--dt") > 0);
      merge(cfg, "policy", policy, re->count("--policy") > 0);
      merge(cfg, "seed", seed, re->count("--seed") > 0);
      if (!out_path.empty()) cfg["out"] = out_path;
      cfg["command"] = "rollout-eval";
      return cmd_rollout_eval(cfg);
    }
    if (app.got_subcommand(cs)) {
      cfg["truth"] = truth_path;
      cfg["learned"] = learned_path;
      merge(cfg, "gamma", gamma, cs->count("--gamma") > 0);
      merge(cfg, "level", level, cs->count("--level") > 0);
      if (!out_path.empty()) cfg["out"] = out_path;
      cfg["command"] = "compare-sets";
      return cmd_compare_sets(cfg);
    }
    if (app.got_subcommand(si)) {
      merge(cfg, "controller", controller, si->count("--controller") > 0);
      if (!value_path.empty()) cfg["value"] = value_path;
      if (!truth_path.empty()) cfg["value"] = truth_path;
      merge(cfg, "gamma", gamma, si->count("--gamma") > 0);
      merge(cfg, "delta", delta, si->count("--delta") > 0);
      merge(cfg, "lr_threshold", lr_threshold, si->count("--lr-threshold") > 0);
      merge(cfg, "trials", trials, si->count("--trials") > 0);
      merge(cfg, "agents", agents, si->count("--agents") > 0);
      merge(cfg, "trial_seconds", trial_seconds, si->count("--trial-seconds") > 0);
      merge(cfg, "v", sim_speed, si->count("--v") > 0);
      merge(cfg, "seed", seed, si->count("--seed") > 0);
      if (!trace_path.empty()) cfg["trace"] = trace_path;
      if (!metrics_path.empty()) cfg["metrics"] = metrics_path;
      cfg["command"] = "simulate";
      return cmd_simulate(cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace rbn
