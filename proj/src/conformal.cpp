#include "rbn/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rbn/random.hpp"

namespace rbn {

std::vector<CalibrationRecord> collect(const ValueNet& net, double gamma, int n, double horizon,
                                       double dt, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("collect: n must be >= 1");
  const SystemModel& sys = net.system;
  MatrixXd X0(sys.state_dim, n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < sys.state_dim; ++i)
      X0(i, j) = sys.domain_lo(i) + (sys.domain_hi(i) - sys.domain_lo(i)) * unit(rng);

  const LearnedRollouts r = learned_policy_rollouts(net, gamma, X0, dt, horizon);
  std::vector<CalibrationRecord> out(n);
  for (int j = 0; j < n; ++j) {
    out[j].x0 = X0.col(j);
    out[j].gamma = gamma;
    out[j].predicted = r.predicted(j);
    out[j].realized_cost = r.min_cost(j);
    out[j].score = r.predicted(j) - r.min_cost(j);
  }
  return out;
}

int min_calibration_size(double epsilon) {
  int n = 1;
  while (std::ceil((n + 1) * (1.0 - epsilon)) > n) ++n;
  return n;
}

double calibrate_scores(std::vector<double> scores, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("calibrate: epsilon must be in (0, 1)");
  const int n = static_cast<int>(scores.size());
  const int k = static_cast<int>(std::ceil((n + 1) * (1.0 - epsilon)));
  if (k > n)
    throw std::invalid_argument("calibrate: n = " + std::to_string(n) +
                                " too small for epsilon = " + std::to_string(epsilon) +
                                "; need n >= " + std::to_string(min_calibration_size(epsilon)));
  std::nth_element(scores.begin(), scores.begin() + (k - 1), scores.end());
  return scores[k - 1];
}

double calibrate(const std::vector<CalibrationRecord>& records, double epsilon) {
  std::vector<double> scores(records.size());
  for (size_t i = 0; i < records.size(); ++i) scores[i] = records[i].score;
  return calibrate_scores(std::move(scores), epsilon);
}

std::vector<DeltaCurve> curve(const ValueNet& net, const std::vector<double>& gammas,
                              const std::vector<double>& epsilons, int n, double horizon,
                              double dt, std::uint64_t seed, int volume_samples) {
  const SystemModel& sys = net.system;
  std::vector<DeltaCurve> out;
  for (size_t gi = 0; gi < gammas.size(); ++gi) {
    std::mt19937_64 rng = substream(seed, "conformal.collect", gi);
    const auto records = collect(net, gammas[gi], n, horizon, dt, rng);

    std::mt19937_64 vrng = substream(seed, "conformal.volume", gi);
    MatrixXd Xv(sys.state_dim, volume_samples);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int j = 0; j < volume_samples; ++j)
      for (int i = 0; i < sys.state_dim; ++i)
        Xv(i, j) = sys.domain_lo(i) + (sys.domain_hi(i) - sys.domain_lo(i)) * unit(vrng);
    const VectorXd values = batch_value(net, Xv, VectorXd::Constant(volume_samples, net.t_f),
                                        VectorXd::Constant(volume_samples, gammas[gi]));

    DeltaCurve dc;
    dc.gamma = gammas[gi];
    dc.n = n;
    for (double eps : epsilons) {
      const double delta = calibrate(records, eps);
      dc.epsilon.push_back(eps);
      dc.delta.push_back(delta);
      dc.safe_volume_fraction.push_back((values.array() > delta).count() /
                                        double(volume_samples));
    }
    out.push_back(std::move(dc));
  }
  return out;
}

}  // namespace rbn
