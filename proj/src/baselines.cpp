#include "servotune/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "servotune/errors.hpp"

namespace servotune {

Oscillation analyze_oscillation(const Eigen::Ref<const Eigen::VectorXd>& x, double dt,
                                Eigen::Index begin, int cycles) {
  Oscillation o;
  const Eigen::Index n = x.size() - begin;
  if (n < 3 || cycles < 1) return o;
  const Eigen::VectorXd y = x.tail(n).array() - x.tail(n).mean();
  const double floor = 1e-9 * y.cwiseAbs().maxCoeff();

  std::vector<Eigen::Index> peaks;
  for (Eigen::Index k = 1; k + 1 < n; ++k)
    if (y(k) > floor && y(k) > y(k - 1) && y(k) >= y(k + 1)) peaks.push_back(k);
  o.peaks = static_cast<int>(peaks.size());
  if (o.peaks < cycles + 1) return o;

  const size_t first = peaks.size() - static_cast<size_t>(cycles) - 1;
  const Eigen::Index k0 = peaks[first], k1 = peaks.back();
  o.ratio = std::pow(y(k1) / y(k0), 1.0 / cycles);
  o.period = static_cast<double>(k1 - k0) * dt / cycles;
  double amp = 0.0;
  for (size_t i = first; i + 1 < peaks.size(); ++i) {
    const auto seg = y.segment(peaks[i], peaks[i + 1] - peaks[i] + 1);
    amp += 0.5 * (seg.maxCoeff() - seg.minCoeff());
  }
  o.amplitude = amp / cycles;
  return o;
}

GainVector zn_pi_rule(double Ku, double Tu, double Kp) {
  if (!(Ku > 0.0) || !(Tu > 0.0)) throw TuningError("ultimate gain and period must be positive");
  const double Kv = 0.45 * Ku;
  const double Ti = Tu / 1.2;
  return {Kp, Kv, Kv / Ti, std::nullopt};
}

namespace {

bool unstable(const Oscillation& o, double band) { return o.saturated || o.ratio > 1.0 + band; }

bool sustained(const Oscillation& o, double band, int cycles) {
  return !o.saturated && o.peaks >= cycles + 1 && std::abs(o.ratio - 1.0) <= band;
}

}  // namespace

UltimateGain find_ultimate_gain(const OscillationProbe& probe, double lo, double hi,
                                const ZieglerNicholsOptions& opt) {
  if (!(lo > 0.0) || !(hi > lo)) throw InvalidArgument("ultimate-gain search needs 0 < lo < hi");
  constexpr int kCycles = 5;
  UltimateGain out;
  auto run = [&](double k) {
    const Oscillation o = probe(k);
    out.probes.push_back({"ultimate", k, o.saturated ? INFINITY : o.ratio, o.period});
    return o;
  };

  const Oscillation top = run(hi);
  if (sustained(top, opt.ratio_band, kCycles)) {
    out.Ku = hi;
    out.Tu = top.period;
    return out;
  }
  if (!unstable(top, opt.ratio_band))
    throw TuningError("no oscillation boundary up to gain " + std::to_string(hi));
  if (unstable(run(lo), opt.ratio_band))
    throw TuningError("loop already oscillates at gain " + std::to_string(lo));

  double period = top.period;
  for (int i = 0; i < opt.bisections && hi / lo - 1.0 > 1e-9; ++i) {
    const double mid = std::sqrt(lo * hi);
    const Oscillation o = run(mid);
    if (sustained(o, opt.ratio_band, kCycles)) {
      out.Ku = mid;
      out.Tu = o.period;
      return out;
    }
    if (unstable(o, opt.ratio_band)) {
      hi = mid;
      if (o.period > 0.0) period = o.period;
    } else {
      lo = mid;
      if (o.period > 0.0) period = o.period;
    }
  }
  out.Ku = std::sqrt(lo * hi);
  out.Tu = period;
  if (!(out.Tu > 0.0)) throw TuningError("oscillation period could not be measured");
  return out;
}

namespace {

// RK4 transition for x' = A x + b u with u held over the step.
struct DiscreteLti {
  Eigen::MatrixXd phi;
  Eigen::VectorXd gamma;
};

DiscreteLti rk4(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double h) {
  const Eigen::Index n = A.rows();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd M = h * A;
  const Eigen::MatrixXd M2 = M * M, M3 = M2 * M, M4 = M3 * M;
  return {I + M + M2 / 2.0 + M3 / 6.0 + M4 / 24.0, h * (I + M / 2.0 + M2 / 6.0 + M3 / 24.0) * b};
}

void check_siso(const StateSpaceModel& m) {
  m.check_dimensions();
  if (m.A.rows() == 0 || m.B.cols() < 1 || m.C.rows() < 1)
    throw InvalidArgument("LTI probe needs a dynamic model with an input and an output");
  if (m.D.size() > 0 && m.D(0, 0) != 0.0) throw InvalidArgument("LTI probe needs a strictly proper model");
}

}  // namespace

OscillationProbe lti_proportional_probe(const StateSpaceModel& m, double dt, double horizon) {
  check_siso(m);
  const auto steps = static_cast<Eigen::Index>(std::llround(horizon / dt));
  return [m, dt, steps](double k) {
    const Eigen::VectorXd b = m.B.col(0);
    const Eigen::RowVectorXd c = m.C.row(0);
    const DiscreteLti d = rk4(m.A - k * b * c, k * b, dt);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(m.A.rows());
    Eigen::VectorXd y(steps);
    Oscillation o;
    for (Eigen::Index i = 0; i < steps; ++i) {
      x = d.phi * x + d.gamma;
      y(i) = c.dot(x);
      if (!std::isfinite(y(i)) || std::abs(y(i)) > 1e12) {
        o.saturated = true;
        return o;
      }
    }
    return analyze_oscillation(y, dt, steps / 5);
  };
}

RelayCycle lti_relay_cycle(const StateSpaceModel& m, double d, double dt, double horizon, int cycles) {
  check_siso(m);
  if (!(d > 0.0)) throw InvalidArgument("relay amplitude must be positive");
  const DiscreteLti p = rk4(m.A, m.B.col(0), dt);
  const Eigen::RowVectorXd c = m.C.row(0);
  const auto steps = static_cast<Eigen::Index>(std::llround(horizon / dt));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m.A.rows());
  Eigen::VectorXd y(steps);
  for (Eigen::Index i = 0; i < steps; ++i) {
    const double e = -c.dot(x);
    x = p.phi * x + p.gamma * (e >= 0.0 ? d : -d);
    y(i) = c.dot(x);
  }
  const Oscillation o = analyze_oscillation(y, dt, steps / 2, cycles);
  if (o.peaks < cycles + 1 || !(o.amplitude > 0.0))
    throw TuningError("relay experiment shows no limit cycle");
  return {o.amplitude, o.period, 4.0 * d / (std::numbers::pi * o.amplitude), cycles};
}

namespace {

// Constant speed setpoint from the second tick on.
ReferenceProfile speed_step(double speed, double horizon, double dt) {
  ReferenceProfile p;
  p.dt = dt;
  const auto n = static_cast<Eigen::Index>(std::llround(horizon / dt)) + 1;
  p.speed = Eigen::VectorXd::Constant(n, speed);
  p.speed(0) = 0.0;
  p.position = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 1; k < n; ++k) p.position(k) = p.position(k - 1) + 0.5 * dt * (p.speed(k - 1) + p.speed(k));
  p.phases.end = p.phases.dwell_end = p.phases.return_decel_end = static_cast<double>(n - 1) * dt;
  p.target = p.position(n - 1);
  p.peak_speed = p.speed_setpoint = speed;
  return p;
}

Oscillation speed_probe(const Experiment& ex, double Kv, double speed, double horizon) {
  SimConfig cfg = ex.sim;
  cfg.mode = ControlMode::speed;
  cfg.speed_controller = SpeedController::pi;
  const ReferenceProfile ref = speed_step(speed, horizon, cfg.controller_period);
  const SimTrace tr = simulate(ex.plant, GainVector{0.0, Kv, 0.0, std::nullopt}, ex.current, ref, cfg);
  Oscillation o;
  if (tr.diverged || tr.current_ref.cwiseAbs().maxCoeff() >= cfg.current_limit) {
    o.saturated = true;
    return o;
  }
  return analyze_oscillation(tr.speed_error / cfg.length_unit, cfg.controller_period, tr.size() / 5);
}

double position_overshoot(const Experiment& ex, const GainVector& g) {
  MetricOptions mo = ex.metric_options;
  mo.overshoot_percent = true;
  const ReferenceProfile p = ex.profile();
  const MetricVector m = extract_metrics(simulate(ex.plant, g, ex.current, p, ex.sim), p, mo);
  return m.diverged ? std::numeric_limits<double>::infinity() : m.position[kOvershoot];
}

// Largest Kp in the set keeping the position overshoot below the limit.
double bisect_kp(const Experiment& ex, const FeasibleSet& set, GainVector g, double limit, int iters,
                 TuningResult& r) {
  const GridAxis& a = set.axes[0];
  auto overshoot = [&](double kp) {
    g.Kp = kp;
    const double v = position_overshoot(ex, g);
    r.probes.push_back({"kp", kp, v, 0.0});
    return v;
  };
  if (overshoot(a.max) < limit) return a.max;
  if (!(overshoot(a.min) < limit)) {
    r.clamped = true;
    return a.min;
  }
  double lo = a.min, hi = a.max;
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    (overshoot(mid) < limit ? lo : hi) = mid;
  }
  return lo;
}

TuningResult finish(const Experiment& ex, const FeasibleSet& set, TuningResult r, double overshoot_limit,
                    int kp_iters) {
  auto clamp_axis = [&](double v, const GridAxis& a) {
    const double c = std::clamp(v, a.min, a.max);
    if (c != v) r.clamped = true;
    return c;
  };
  // The integral time of the rule is kept when Kv has to be clamped.
  const GainVector rule = zn_pi_rule(r.Ku, r.Tu, set.axes[0].min);
  const double Ti = rule.Kv / rule.Ki;
  GainVector g = rule;
  g.Kv = clamp_axis(rule.Kv, set.axes[1]);
  if (set.integral == IntegralParam::tn)
    g = GainVector::from_tn(g.Kp, g.Kv, clamp_axis(Ti, set.axes[2]));
  else
    g.Ki = clamp_axis(g.Kv / Ti, set.axes[2]);
  g.Kp = bisect_kp(ex, set, g, overshoot_limit, kp_iters, r);
  r.gains = g;
  r.metrics = ex.metrics(g);
  r.cost = cost(r.metrics, ex.weights);
  return r;
}

}  // namespace

TuningResult ziegler_nichols(const Experiment& ex, const FeasibleSet& set, const ZieglerNicholsOptions& opt) {
  ex.validate();
  set.validate();
  TuningResult r;
  r.method = "ziegler-nichols";
  const OscillationProbe probe = [&](double k) {
    return speed_probe(ex, k, opt.probe_speed, opt.probe_horizon);
  };
  UltimateGain u = find_ultimate_gain(probe, set.axes[1].min / opt.search_factor,
                                      set.axes[1].max * opt.search_factor, opt);
  r.Ku = u.Ku;
  r.Tu = u.Tu;
  r.probes = std::move(u.probes);
  return finish(ex, set, std::move(r), opt.overshoot_limit, opt.kp_bisections);
}

TuningResult relay_tune(const Experiment& ex, const FeasibleSet& set, const RelayOptions& opt) {
  ex.validate();
  set.validate();
  TuningResult r;
  r.method = "relay";
  SimConfig cfg = ex.sim;
  cfg.mode = ControlMode::speed;
  cfg.speed_controller = SpeedController::relay;
  cfg.relay_amplitude = opt.amplitude_fraction * cfg.current_limit;
  const ReferenceProfile ref = speed_step(opt.probe_speed, opt.probe_horizon, cfg.controller_period);
  const SimTrace tr = simulate(ex.plant, GainVector{0.0, 0.0, 0.0, std::nullopt}, ex.current, ref, cfg);
  if (tr.diverged) throw TuningError("relay experiment diverged");
  const Oscillation o =
      analyze_oscillation(tr.speed_error / cfg.length_unit, cfg.controller_period, tr.size() / 2, opt.cycles);
  if (o.peaks < opt.cycles + 1 || !(o.amplitude > 0.0) || !(o.period > 0.0))
    throw TuningError("relay experiment shows no limit cycle within the horizon");
  r.relay_amplitude = cfg.relay_amplitude;
  r.cycle_amplitude = o.amplitude;
  r.Ku = 4.0 * cfg.relay_amplitude / (std::numbers::pi * o.amplitude);
  r.Tu = o.period;
  r.probes.push_back({"relay", cfg.relay_amplitude, o.amplitude, o.period});
  return finish(ex, set, std::move(r), opt.overshoot_limit, opt.kp_bisections);
}

TuningResult itae_tune(const MetricTable& table, const CostWeights& w) {
  TuningResult r;
  r.method = "itae";
  long best = -1;
  double best_v = std::numeric_limits<double>::infinity();
  for (long i = 0; i < static_cast<long>(table.rows.size()); ++i) {
    const MetricVector& m = table.rows[static_cast<size_t>(i)];
    const double v = m.diverged ? INFINITY : m.position[kItae] + m.speed[kItae];
    if (v < best_v) {
      best_v = v;
      best = i;
    }
  }
  if (best < 0) throw TuningError("every grid point diverged");
  r.gains = table.set.gains(best);
  r.metrics = table.rows[static_cast<size_t>(best)];
  r.cost = cost(r.metrics, w);
  r.probes.push_back({"itae", static_cast<double>(best), best_v, 0.0});
  return r;
}

TuningResult itae_tune(const Experiment& ex, const FeasibleSet& set, int threads) {
  return itae_tune(evaluate_grid(ex, set, threads), ex.weights);
}

void write_probes(const TuningResult& r, std::ostream& out) {
  out << "stage,param,value,period\n";
  out.precision(17);
  for (const ProbeRecord& p : r.probes)
    out << p.stage << ',' << p.param << ',' << p.value << ',' << p.period << '\n';
}

}  // namespace servotune
