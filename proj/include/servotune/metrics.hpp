#ifndef SERVOTUNE_METRICS_HPP
#define SERVOTUNE_METRICS_HPP

// Tracking-performance metrics of one experiment and the weighted cost.

#include <Eigen/Dense>

#include <array>
#include <string>

#include "servotune/refgen.hpp"
#include "servotune/simloop.hpp"

namespace servotune {

enum Metric : int {
  kOvershoot = 0,
  kUndershoot,
  kSettlingTime,
  kInfNorm,
  kItae,
  kSteadyState,
  kZeroError,  // position channel only
};

inline constexpr int kPositionMetrics = 7;
inline constexpr int kSpeedMetrics = 6;

struct MetricVector {
  std::array<double, kPositionMetrics> position{};
  std::array<double, kSpeedMetrics> speed{};
  bool diverged = false;

  static MetricVector sentinel();
  bool finite() const;
};

struct MetricOptions {
  double band_fraction = 0.02;     // settling band relative to move / speed setpoint
  double ss_window = 0.1;          // trailing fraction of the plateau for SS error
  double zero_window = 0.5;        // trailing fraction of the terminal dwell
  bool overshoot_percent = false;  // report h in % of the final value instead of units
};

struct CostWeights {
  std::array<double, kPositionMetrics> position{};
  std::array<double, kSpeedMetrics> speed{};
  double divergence_penalty = 1e9;

  void validate() const;
};

/// Simulation weights (settling, overshoot, infinity norm; speed ITAE).
CostWeights paper_table2_sim_weights();
/// Weights used on the physical stage.
CostWeights paper_table_exp_weights();
/// Named lookup; throws ConfigError for unknown names.
CostWeights weights_preset(const std::string& name);

/// Integral of (t - t_i)|e(t)| over [t_i, t_f] for e sampled at k*dt,
/// integrating the piecewise-linear interpolant of |e| exactly. Throws
/// InvalidArgument when the window holds fewer than two samples.
double itae(const Eigen::Ref<const Eigen::VectorXd>& e, double dt, double t_i, double t_f);

/// Time from `begin` until |e| stays within `band` through `end` (sample
/// indices, inclusive); 0 when the band is never left.
double settling_time(const Eigen::Ref<const Eigen::VectorXd>& e, double dt, Eigen::Index begin,
                     Eigen::Index end, double band);

/// Step-response metrics use the forward leg and its dwell (the position
/// plateau) or the cruise phase (the speed plateau; the dwell for a
/// triangular profile). The infinity norm and ITAE span the whole experiment.
MetricVector extract_metrics(const SimTrace& trace, const ReferenceProfile& profile,
                             const MetricOptions& opt = {});

/// Weighted sum f = f^p + f^s; a diverged or non-finite vector costs the
/// divergence penalty.
double cost(const MetricVector& m, const CostWeights& w);

}  // namespace servotune

#endif  // SERVOTUNE_METRICS_HPP
