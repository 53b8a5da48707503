#include "servotune/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "servotune/errors.hpp"

namespace servotune {

MetricVector MetricVector::sentinel() {
  MetricVector m;
  m.position.fill(std::numeric_limits<double>::infinity());
  m.speed.fill(std::numeric_limits<double>::infinity());
  m.diverged = true;
  return m;
}

bool MetricVector::finite() const {
  return std::all_of(position.begin(), position.end(), [](double v) { return std::isfinite(v); }) &&
         std::all_of(speed.begin(), speed.end(), [](double v) { return std::isfinite(v); });
}

void CostWeights::validate() const {
  bool any = false;
  for (double w : position) {
    if (!(w >= 0.0)) throw InvalidArgument("cost weights must be non-negative");
    any = any || w > 0.0;
  }
  for (double w : speed) {
    if (!(w >= 0.0)) throw InvalidArgument("cost weights must be non-negative");
    any = any || w > 0.0;
  }
  if (!any) throw InvalidArgument("at least one cost weight must be positive");
  if (!(divergence_penalty >= 0.0)) throw InvalidArgument("divergence penalty must be non-negative");
}

CostWeights paper_table2_sim_weights() {
  CostWeights w;
  w.position[kSettlingTime] = 1e5;
  w.position[kOvershoot] = 1e2;
  w.position[kInfNorm] = 1e3;
  w.speed[kSettlingTime] = 5e2;
  w.speed[kOvershoot] = 2.0;
  w.speed[kInfNorm] = 5e2;
  w.speed[kItae] = 1e4;
  return w;
}

CostWeights paper_table_exp_weights() {
  CostWeights w;
  w.position[kSettlingTime] = 2e1;
  w.position[kOvershoot] = 5e4;
  w.position[kInfNorm] = 5e4;
  w.position[kZeroError] = 1e5;
  w.speed[kSettlingTime] = 2e1;
  w.speed[kOvershoot] = 1e3;
  w.speed[kItae] = 2.5e5;
  w.speed[kSteadyState] = 5e2;
  w.speed[kUndershoot] = 2e3;
  return w;
}

CostWeights weights_preset(const std::string& name) {
  if (name == "paper-table2-sim") return paper_table2_sim_weights();
  if (name == "paper-table-exp") return paper_table_exp_weights();
  throw ConfigError("unknown weight preset '" + name + "'");
}

double itae(const Eigen::Ref<const Eigen::VectorXd>& e, double dt, double t_i, double t_f) {
  if (!(dt > 0.0)) throw InvalidArgument("sample period must be positive");
  const auto first = static_cast<Eigen::Index>(std::ceil(t_i / dt - 1e-9));
  const auto last = std::min<Eigen::Index>(
      static_cast<Eigen::Index>(std::floor(t_f / dt + 1e-9)), e.size() - 1);
  if (first < 0 || last - first < 1) throw InvalidArgument("ITAE window holds fewer than two samples");

  // Exact integral of the product of two linear functions on each interval:
  // h/6 (2 f0 g0 + f0 g1 + f1 g0 + 2 f1 g1).
  double acc = 0.0;
  for (Eigen::Index k = first; k < last; ++k) {
    const double w0 = static_cast<double>(k) * dt - t_i;
    const double w1 = static_cast<double>(k + 1) * dt - t_i;
    const double a = std::abs(e(k));
    const double b = std::abs(e(k + 1));
    acc += dt / 6.0 * (2.0 * w0 * a + w0 * b + w1 * a + 2.0 * w1 * b);
  }
  return acc;
}

double settling_time(const Eigen::Ref<const Eigen::VectorXd>& e, double dt, Eigen::Index begin,
                     Eigen::Index end, double band) {
  for (Eigen::Index k = end; k >= begin; --k) {
    const double a = std::abs(e(k));
    if (a <= band) continue;
    if (k == end) return static_cast<double>(k - begin) * dt;
    // Linear interpolation of the final band entry between k and k+1.
    const double b = std::abs(e(k + 1));
    return (static_cast<double>(k - begin) + (a - band) / (a - b)) * dt;
  }
  return 0.0;
}

namespace {

struct StepStats {
  double overshoot = 0.0;
  double undershoot = 0.0;
};

// Overshoot past `final_value` and undershoot after first reaching it,
// both in the direction of motion `dir`, over samples [begin, end].
StepStats step_stats(const Eigen::VectorXd& y, double final_value, double dir, Eigen::Index begin,
                     Eigen::Index end) {
  StepStats s;
  Eigen::Index crossed = -1;
  for (Eigen::Index k = begin; k <= end; ++k) {
    const double excess = dir * (y(k) - final_value);
    s.overshoot = std::max(s.overshoot, excess);
    if (crossed < 0 && excess >= 0.0) crossed = k;
    if (crossed >= 0) s.undershoot = std::max(s.undershoot, -excess);
  }
  return s;
}

double tail_mean_abs(const Eigen::VectorXd& e, Eigen::Index begin, Eigen::Index end, double frac) {
  const Eigen::Index n = end - begin + 1;
  const auto m = std::clamp<Eigen::Index>(
      static_cast<Eigen::Index>(std::ceil(frac * static_cast<double>(n) - 1e-9)), 1, n);
  return e.segment(end - m + 1, m).cwiseAbs().mean();
}

double tail_max_abs(const Eigen::VectorXd& e, Eigen::Index begin, Eigen::Index end, double frac) {
  const Eigen::Index n = end - begin + 1;
  const auto m = std::clamp<Eigen::Index>(
      static_cast<Eigen::Index>(std::ceil(frac * static_cast<double>(n) - 1e-9)), 1, n);
  return e.segment(end - m + 1, m).cwiseAbs().maxCoeff();
}

}  // namespace

MetricVector extract_metrics(const SimTrace& trace, const ReferenceProfile& profile,
                             const MetricOptions& opt) {
  if (trace.diverged) return MetricVector::sentinel();
  if (trace.size() == 0 || trace.size() != profile.size())
    throw InvalidArgument("trace is not aligned with the reference profile");

  const double dt = trace.dt;
  const ProfilePhases& ph = profile.phases;
  const Eigen::Index start = profile.index_of(ph.motion_start);
  const Eigen::Index arrive = profile.index_of(ph.decel_end);
  const Eigen::Index dwell_end = profile.index_of(ph.dwell_end);
  const Eigen::Index last = trace.size() - 1;
  const double t_end = static_cast<double>(last) * dt;

  const double move = std::abs(profile.target);
  const double dir = profile.target < 0.0 ? -1.0 : 1.0;
  MetricVector m;

  // Position channel.
  {
    auto& p = m.position;
    const StepStats st = step_stats(trace.position, profile.target, dir, arrive, dwell_end);
    p[kOvershoot] = st.overshoot;
    p[kUndershoot] = st.undershoot;
    if (opt.overshoot_percent && move > 0.0) {
      p[kOvershoot] *= 100.0 / move;
      p[kUndershoot] *= 100.0 / move;
    }
    p[kSettlingTime] =
        move > 0.0 ? settling_time(trace.position_error, dt, start, dwell_end, opt.band_fraction * move)
                   : 0.0;
    p[kInfNorm] = trace.position_error.cwiseAbs().maxCoeff();
    p[kItae] = last > 0 ? itae(trace.position_error, dt, ph.motion_start, t_end) : 0.0;
    p[kSteadyState] = tail_mean_abs(trace.position_error, arrive, dwell_end, opt.ss_window);
    p[kZeroError] = profile.returns ? tail_max_abs(trace.position_error,
                                                   profile.index_of(ph.return_decel_end), last,
                                                   opt.zero_window)
                                    : 0.0;
  }

  // Speed channel.
  {
    auto& s = m.speed;
    const Eigen::Index cruise_begin = profile.index_of(ph.accel_end);
    const Eigen::Index cruise_end = profile.index_of(ph.cruise_end);
    const double peak = std::abs(profile.peak_speed);
    if (move > 0.0) {
      const StepStats st = step_stats(trace.speed, profile.peak_speed, dir, cruise_begin, cruise_end);
      s[kOvershoot] = st.overshoot;
      s[kUndershoot] = st.undershoot;
      if (opt.overshoot_percent && peak > 0.0) {
        s[kOvershoot] *= 100.0 / peak;
        s[kUndershoot] *= 100.0 / peak;
      }
      s[kSettlingTime] = settling_time(trace.speed_error, dt, start, dwell_end,
                                       opt.band_fraction * profile.speed_setpoint);
    }
    s[kInfNorm] = trace.speed_error.cwiseAbs().maxCoeff();
    s[kItae] = last > 0 ? itae(trace.speed_error, dt, ph.motion_start, t_end) : 0.0;
    s[kSteadyState] = cruise_end > cruise_begin
                          ? tail_mean_abs(trace.speed_error, cruise_begin, cruise_end, opt.ss_window)
                          : tail_mean_abs(trace.speed_error, arrive, dwell_end, opt.ss_window);
  }
  return m;
}

double cost(const MetricVector& m, const CostWeights& w) {
  if (m.diverged || !m.finite()) return w.divergence_penalty;
  double f = 0.0;
  for (int i = 0; i < kPositionMetrics; ++i) f += w.position[i] * m.position[i];
  for (int i = 0; i < kSpeedMetrics; ++i) f += w.speed[i] * m.speed[i];
  return f;
}

}  // namespace servotune
