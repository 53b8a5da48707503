#ifndef SERVOTUNE_BASELINES_HPP
#define SERVOTUNE_BASELINES_HPP

// Classical tuning rules: Ziegler-Nichols ultimate-gain search, relay
// autotuning and exhaustive ITAE minimization.

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "servotune/experiment.hpp"
#include "servotune/plant.hpp"
#include "servotune/tuner.hpp"

namespace servotune {

/// Peaks of a sustained or decaying oscillation.
struct Oscillation {
  int peaks = 0;
  double ratio = 0.0;      // geometric mean of consecutive peak-amplitude ratios
  double amplitude = 0.0;  // mean half peak-to-peak over the analysed cycles
  double period = 0.0;     // mean peak spacing [s]
  bool saturated = false;  // actuator limit reached (treated as unstable)
};

/// Looks at the last `cycles` + 1 maxima of x - mean(x) on [begin, end).
Oscillation analyze_oscillation(const Eigen::Ref<const Eigen::VectorXd>& x, double dt,
                                Eigen::Index begin, int cycles = 5);

struct ProbeRecord {
  std::string stage;
  double param = 0.0;
  double value = 0.0;  // peak ratio, overshoot [%] or amplitude
  double period = 0.0;
};

struct TuningResult {
  std::string method;
  GainVector gains;
  double cost = 0.0;
  MetricVector metrics;
  bool clamped = false;
  double Ku = 0.0;
  double Tu = 0.0;
  double relay_amplitude = 0.0;
  double cycle_amplitude = 0.0;
  std::vector<ProbeRecord> probes;
};

struct ZieglerNicholsOptions {
  double probe_speed = 1e-4;     // m/s, speed step used to excite the loop
  double probe_horizon = 0.5;    // s
  double search_factor = 100.0;  // Kv searched up to factor * Kv_max
  double ratio_band = 0.02;      // |ratio - 1| <= band counts as sustained
  int bisections = 60;
  double overshoot_limit = 25.0;  // % of the move
  int kp_bisections = 30;
};

struct RelayOptions {
  double amplitude_fraction = 0.1;  // relay output as a fraction of the current limit
  double probe_speed = 1e-4;
  double probe_horizon = 0.5;
  int cycles = 5;
  double overshoot_limit = 25.0;
  int kp_bisections = 30;
};

/// Classic PI row: Kv = 0.45 Ku, Ti = Tu / 1.2.
GainVector zn_pi_rule(double Ku, double Tu, double Kp);

/// Oscillation of the loop closed with proportional gain k.
using OscillationProbe = std::function<Oscillation(double k)>;

struct UltimateGain {
  double Ku = 0.0;
  double Tu = 0.0;
  std::vector<ProbeRecord> probes;
};

/// Bisects k in [lo, hi] (geometrically) for the sustained-oscillation
/// boundary. Throws TuningError when hi does not oscillate.
UltimateGain find_ultimate_gain(const OscillationProbe& probe, double lo, double hi,
                                const ZieglerNicholsOptions& opt = {});

/// Unit-step proportional loop around the first input/output of a strictly
/// proper LTI model, integrated with RK4 at step dt.
OscillationProbe lti_proportional_probe(const StateSpaceModel& m, double dt, double horizon);

struct RelayCycle {
  double amplitude = 0.0;  // a
  double period = 0.0;     // Tu
  double Ku = 0.0;         // 4 d / (pi a)
  int cycles = 0;
};

/// Ideal relay of amplitude d around the first input/output of an LTI model.
RelayCycle lti_relay_cycle(const StateSpaceModel& m, double d, double dt, double horizon,
                           int cycles = 5);

TuningResult ziegler_nichols(const Experiment& ex, const FeasibleSet& set,
                             const ZieglerNicholsOptions& opt = {});
TuningResult relay_tune(const Experiment& ex, const FeasibleSet& set, const RelayOptions& opt = {});
/// Argmin of e^p_ITAE + e^s_ITAE over the table; cost under ex.weights.
TuningResult itae_tune(const MetricTable& table, const CostWeights& w);
TuningResult itae_tune(const Experiment& ex, const FeasibleSet& set, int threads = 1);

/// CSV `stage,param,value,period`.
void write_probes(const TuningResult& r, std::ostream& out);

}  // namespace servotune

#endif  // SERVOTUNE_BASELINES_HPP
