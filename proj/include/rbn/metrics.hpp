#pragma once

#include <cstdint>

#include "rbn/systems.hpp"
#include "rbn/value_provider.hpp"

namespace rbn {

struct SetComparison {
  double iou = 0.0;  // |S_t ∩ S_l| / |S_t ∪ S_l|
  double fi = 0.0;   // falsely included fraction of all points
  double fe = 0.0;   // falsely excluded fraction of all points
  std::int64_t n_points = 0;
  bool degenerate = false;  // both super-level sets empty
};

// Super-level-set agreement between a ground-truth provider and a learned
// provider over the given sample points (columns).
SetComparison compare_sets(const BatchValueFn& truth, const BatchValueFn& learned,
                           const MatrixXd& points, double tau, double gamma, double level = 0.0);

struct RolloutClassification {
  double fpr = 0.0;
  double fnr = 0.0;
  double cc = 0.0;  // 1 - fpr - fnr
  int n = 0;
};

enum class RolloutPolicyKind {
  LearnedOptimal,     // argmax_u grad V . f at tau = t_f - t
  QpFilteredNominal,  // CBF-QP around a goal-seeking proportional nominal
};

// Samples n uniform initial states; predicted-safe iff V - delta >= 0 at
// tau = t_f; collision iff min of l over the rollout < 0.
RolloutClassification classify_rollouts(const SystemModel& sys, const BatchGradFn& value,
                                        double t_f, RolloutPolicyKind policy, int n,
                                        double horizon, double dt, double gamma, double delta,
                                        std::uint64_t seed);

}  // namespace rbn
