#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "rbn/network.hpp"
#include "rbn/training.hpp"
#include "rbn/value_provider.hpp"

namespace rbn {

struct CalibrationRecord {
  VectorXd x0;
  double gamma;
  double predicted;      // V(x0) at the rollout horizon
  double realized_cost;  // min of l along the rollout, initial state included
  double score;          // predicted - realized_cost
};

// Rollouts under the learned optimal policy from uniform initial states.
std::vector<CalibrationRecord> collect(const ValueNet& net, double gamma, int n, double horizon,
                                       double dt, std::mt19937_64& rng);

// Split-conformal shift: the k-th smallest score with k = ceil((n+1)(1-eps)).
// Under exchangeability P(realized >= predicted - delta) >= 1 - eps.
double calibrate(const std::vector<CalibrationRecord>& records, double epsilon);
double calibrate_scores(std::vector<double> scores, double epsilon);

// Smallest calibration size for which the quantile index exists.
int min_calibration_size(double epsilon);

struct DeltaCurve {
  double gamma;
  std::vector<double> epsilon;
  std::vector<double> delta;
  std::vector<double> safe_volume_fraction;  // Monte Carlo volume of {V - delta > 0}
  int n = 0;
};

// One curve per gamma; volume fractions are estimated at tau = t_f.
std::vector<DeltaCurve> curve(const ValueNet& net, const std::vector<double>& gammas,
                              const std::vector<double>& epsilons, int n, double horizon,
                              double dt, std::uint64_t seed, int volume_samples = 10000);

}  // namespace rbn
