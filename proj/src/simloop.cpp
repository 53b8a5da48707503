#include "servotune/simloop.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "servotune/errors.hpp"

namespace servotune {

GainVector GainVector::from_tn(double Kp, double Kv, double Tn) {
  if (!(Tn > 0.0)) throw InvalidArgument("integral time must be positive");
  return {Kp, Kv, Kv / Tn, Tn};
}

void GainVector::validate() const {
  if (!(Kp > 0.0) || !(Kv > 0.0) || !(Ki > 0.0) || !std::isfinite(Kp) ||
      !std::isfinite(Kv) || !std::isfinite(Ki))
    throw InvalidArgument("controller gains must be strictly positive and finite");
  if (Tn && std::abs(Ki - Kv / *Tn) > 1e-12 * Ki)
    throw InvalidArgument("Ki is inconsistent with Kv / Tn");
}

void CurrentControllerGains::validate() const {
  if (!(Kcp >= 0.0) || !(Kci >= 0.0) || !(Kcd >= 0.0))
    throw InvalidArgument("current controller gains must be non-negative");
}

long SimConfig::substeps_per_period() const {
  return std::lround(controller_period / substep);
}

void SimConfig::validate() const {
  if (!(controller_period > 0.0) || !(substep > 0.0))
    throw InvalidArgument("controller period and substep must be positive");
  const double ratio = controller_period / substep;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio || std::round(ratio) < 1.0)
    throw InvalidArgument("substep must divide the controller period");
  if (!(voltage_limit > 0.0) || !(current_limit > 0.0))
    throw InvalidArgument("voltage and current limits must be positive");
  if (!(derivative_filter > 0.0)) throw InvalidArgument("derivative filter must be positive");
  if (!(length_unit > 0.0) || !(derivative_time_unit > 0.0))
    throw InvalidArgument("unit scales must be positive");
  if (noise_position < 0.0 || noise_speed < 0.0 || noise_current < 0.0)
    throw InvalidArgument("noise standard deviations must be non-negative");
}

namespace {

template <int N>
struct Propagator {
  Eigen::Matrix<double, N, N> phi;
  Eigen::Matrix<double, N, 2> gamma;
};

// RK4 applied to x' = A x + B u with u constant over the step is the linear
// map x -> phi x + gamma u below; precomputing it is exact, not an
// approximation of RK4.
template <int N>
Propagator<N> rk4_propagator(const StateSpaceModel& m, double h) {
  const Eigen::Matrix<double, N, N> A = m.A;
  const Eigen::Matrix<double, N, 2> B = m.B;
  const Eigen::Matrix<double, N, N> I = Eigen::Matrix<double, N, N>::Identity();
  const Eigen::Matrix<double, N, N> M = h * A;
  const Eigen::Matrix<double, N, N> M2 = M * M;
  const Eigen::Matrix<double, N, N> M3 = M2 * M;
  const Eigen::Matrix<double, N, N> M4 = M3 * M;
  Propagator<N> out;
  out.phi = I + M + M2 / 2.0 + M3 / 6.0 + M4 / 24.0;
  out.gamma = h * (I + M / 2.0 + M2 / 6.0 + M3 / 24.0) * B;
  return out;
}

double clamp_abs(double v, double limit) { return std::clamp(v, -limit, limit); }

// Plant state index layout for the two model variants.
template <int N>
struct Layout;
template <>
struct Layout<5> {
  static constexpr int current = kCurrent, motor_speed = kMotorSpeed, motor_angle = kMotorAngle,
                       load_speed = kLoadSpeed, load_angle = kLoadAngle;
};
template <>
struct Layout<3> {
  static constexpr int current = 0, motor_speed = 1, motor_angle = 2, load_speed = 1,
                       load_angle = 2;
};

template <int N>
SimTrace run(const PlantParams& plant, const GainVector& gains, const CurrentControllerGains& cc,
             const ReferenceProfile& profile, const SimConfig& cfg) {
  using L = Layout<N>;
  const StateSpaceModel model = physical_state_model(plant, cfg.rigid_plant);
  const double h = cfg.substep;
  const double T = cfg.controller_period;
  const long substeps = cfg.substeps_per_period();
  const Propagator<N> prop = rk4_propagator<N>(model, h);

  const double mpr = plant.meters_per_radian();
  const double unit = cfg.length_unit;
  const double speed_cmd_limit = plant.omega_max * mpr / unit;
  const double kd = cc.Kcd * cfg.derivative_time_unit;
  const double filter_gain = 1.0 - std::exp(-cfg.derivative_filter * h);

  const Eigen::Index ticks = profile.size();
  SimTrace tr;
  tr.dt = T;
  for (Eigen::VectorXd* v :
       {&tr.time, &tr.ref_position, &tr.position, &tr.ref_speed, &tr.speed, &tr.load_position,
        &tr.load_speed, &tr.motor_speed, &tr.current, &tr.current_ref, &tr.voltage,
        &tr.position_error, &tr.speed_error})
    v->setZero(ticks);

  // Load torque per tick.
  Eigen::VectorXd load_torque = Eigen::VectorXd::Zero(ticks);
  for (const TorqueImpulse& d : cfg.disturbances) {
    const auto k = static_cast<Eigen::Index>(std::floor(d.time / T + 1e-9));
    if (k >= 0 && k < ticks) load_torque(k) += d.torque;
  }

  std::mt19937_64 rng(cfg.noise_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto noise = [&](double sd) { return sd > 0.0 ? sd * gauss(rng) : 0.0; };

  Eigen::Matrix<double, N, 1> x = Eigen::Matrix<double, N, 1>::Zero();
  double speed_integral = 0.0;    // speed PI state [unit]
  double current_integral = 0.0;  // current PID integral [A s]
  double current_filtered = 0.0;  // derivative filter state [A]

  Eigen::Index recorded = 0;
  for (Eigen::Index k = 0; k < ticks; ++k) {
    const double t = static_cast<double>(k) * T;
    const double y_pos = x(L::motor_angle) * mpr + noise(cfg.noise_position);
    const double y_speed = x(L::motor_speed) * mpr + noise(cfg.noise_speed);
    const double r_pos = profile.position(k);
    const double r_speed = profile.speed(k);

    // Outer loops, in controller length units.
    double i_ref = 0.0;
    if (cfg.mode == ControlMode::current) {
      i_ref = cfg.current_command;
    } else {
      double speed_cmd = r_speed / unit;
      if (cfg.mode == ControlMode::position) {
        const double correction = gains.Kp * (r_pos - y_pos) / unit;
        speed_cmd = cfg.position_loop_mode == PositionLoopMode::summed ? speed_cmd + correction
                                                                       : correction;
      }
      speed_cmd = clamp_abs(speed_cmd, speed_cmd_limit);
      const double e = speed_cmd - y_speed / unit;
      if (cfg.speed_controller == SpeedController::relay) {
        i_ref = e >= 0.0 ? cfg.relay_amplitude : -cfg.relay_amplitude;
      } else {
        const double candidate = speed_integral + e * T;
        const double unsat = gains.Kv * e + gains.Ki * candidate;
        const bool winding = std::abs(unsat) > cfg.current_limit && unsat * e > 0.0;
        if (!(cfg.anti_windup && winding)) speed_integral = candidate;
        i_ref = gains.Kv * e + gains.Ki * speed_integral;
      }
    }
    i_ref = clamp_abs(i_ref, cfg.current_limit);

    tr.time(k) = t;
    tr.ref_position(k) = r_pos;
    tr.position(k) = y_pos;
    tr.ref_speed(k) = r_speed;
    tr.speed(k) = y_speed;
    tr.load_position(k) = x(L::load_angle) * mpr;
    tr.load_speed(k) = x(L::load_speed) * mpr;
    tr.motor_speed(k) = x(L::motor_speed);
    tr.current(k) = x(L::current);
    tr.current_ref(k) = i_ref;
    tr.position_error(k) = r_pos - y_pos;
    tr.speed_error(k) = r_speed - y_speed;
    recorded = k + 1;

    if (k + 1 == ticks) break;

    Eigen::Vector2d u(0.0, load_torque(k));
    for (long j = 0; j < substeps; ++j) {
      // Overspeed guard: no torque further in the direction of motion.
      double i_cmd = i_ref;
      const double w = x(L::motor_speed);
      if ((w >= plant.omega_max && i_cmd > 0.0) || (w <= -plant.omega_max && i_cmd < 0.0))
        i_cmd = 0.0;

      const double i_meas = x(L::current) + noise(cfg.noise_current);
      const double e = i_cmd - i_meas;
      const double derivative = -kd * cfg.derivative_filter * (i_meas - current_filtered);
      const double candidate = current_integral + e * h;
      const double unsat = cc.Kcp * e + cc.Kci * candidate + derivative;
      const bool winding = std::abs(unsat) > cfg.voltage_limit && unsat * e > 0.0;
      if (!(cfg.anti_windup && winding)) current_integral = candidate;
      const double v =
          clamp_abs(cc.Kcp * e + cc.Kci * current_integral + derivative, cfg.voltage_limit);
      current_filtered += filter_gain * (i_meas - current_filtered);
      if (j == 0) tr.voltage(k) = v;

      u(0) = v;
      x = prop.phi * x + prop.gamma * u;
    }

    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > cfg.divergence_threshold) {
      tr.diverged = true;
      tr.divergence_time = t + T;
      break;
    }
  }

  if (recorded < ticks) {
    for (Eigen::VectorXd* v :
         {&tr.time, &tr.ref_position, &tr.position, &tr.ref_speed, &tr.speed, &tr.load_position,
          &tr.load_speed, &tr.motor_speed, &tr.current, &tr.current_ref, &tr.voltage,
          &tr.position_error, &tr.speed_error})
      v->conservativeResize(recorded);
  }
  return tr;
}

}  // namespace

SimTrace simulate(const PlantParams& plant, const GainVector& gains,
                  const CurrentControllerGains& cc, const ReferenceProfile& profile,
                  const SimConfig& cfg) {
  plant.validate();
  cc.validate();
  cfg.validate();
  if (!(gains.Kp >= 0.0) || !(gains.Kv >= 0.0) || !(gains.Ki >= 0.0))
    throw InvalidArgument("controller gains must be non-negative");
  if (profile.size() == 0) throw InvalidArgument("empty reference profile");
  if (std::abs(profile.dt - cfg.controller_period) > 1e-12 * cfg.controller_period)
    throw InvalidArgument("profile must be sampled at the controller period");

  GainVector g = gains;
  if (cfg.mode != ControlMode::position) g.Kp = 0.0;
  return cfg.rigid_plant ? run<3>(plant, g, cc, profile, cfg) : run<5>(plant, g, cc, profile, cfg);
}

StabilityReport stability_probe(const PlantParams& plant, const GainVector& gains,
                                const CurrentControllerGains& cc, const SimConfig& cfg) {
  TrajectorySpec step;
  step.position_setpoint = 1e-3;
  step.speed_setpoint = 0.2;
  step.acceleration = 100.0;
  step.deceleration = 100.0;
  step.dwell_time = 0.4;
  step.return_to_zero = false;
  const ReferenceProfile profile = generate_profile(step, cfg.controller_period);
  const SimTrace tr = simulate(plant, gains, cc, profile, cfg);

  StabilityReport rep;
  if (tr.diverged) return rep;

  const Eigen::Index begin = profile.index_of(profile.phases.decel_end);
  const Eigen::Index len = tr.size() - begin;
  const Eigen::Index q = len / 4;
  if (q < 1) return rep;
  const double second = tr.position_error.segment(begin + q, q).cwiseAbs().maxCoeff();
  const double last = tr.position_error.segment(begin + 3 * q, len - 3 * q).cwiseAbs().maxCoeff();
  const double saturated = tr.current_ref.segment(begin + 3 * q, len - 3 * q).cwiseAbs().maxCoeff();
  rep.decay = second > 0.0 ? last / second : (last > 0.0 ? INFINITY : 0.0);
  rep.stable = last <= second && saturated < cfg.current_limit;
  return rep;
}

void write_csv(const SimTrace& tr, std::ostream& out) {
  out << "t,r_pos,pos,r_speed,speed,load_pos,load_speed,motor_speed,current,current_ref,"
         "voltage,e_pos,e_speed\n";
  out.precision(17);
  for (Eigen::Index k = 0; k < tr.size(); ++k) {
    out << tr.time(k) << ',' << tr.ref_position(k) << ',' << tr.position(k) << ','
        << tr.ref_speed(k) << ',' << tr.speed(k) << ',' << tr.load_position(k) << ','
        << tr.load_speed(k) << ',' << tr.motor_speed(k) << ',' << tr.current(k) << ','
        << tr.current_ref(k) << ',' << tr.voltage(k) << ',' << tr.position_error(k) << ','
        << tr.speed_error(k) << '\n';
  }
}

std::string to_string(ControlMode mode) {
  switch (mode) {
    case ControlMode::position: return "position";
    case ControlMode::speed: return "speed";
    case ControlMode::current: return "current";
  }
  return "position";
}

std::string to_string(PositionLoopMode mode) {
  return mode == PositionLoopMode::summed ? "summed" : "full";
}

ControlMode parse_control_mode(const std::string& s) {
  if (s == "position") return ControlMode::position;
  if (s == "speed") return ControlMode::speed;
  if (s == "current") return ControlMode::current;
  throw ConfigError("unknown control mode '" + s + "'");
}

PositionLoopMode parse_position_loop_mode(const std::string& s) {
  if (s == "summed") return PositionLoopMode::summed;
  if (s == "full") return PositionLoopMode::full;
  throw ConfigError("unknown position loop mode '" + s + "'");
}

}  // namespace servotune
