#include "servotune/refgen.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "servotune/errors.hpp"

namespace servotune {

namespace {

// Sample counts of one leg: ramp up, cruise, ramp down; `speed` is the
// (possibly reduced) cruise speed that makes the leg end exactly on target.
struct Leg {
  long accel = 0;
  long cruise = 0;
  long decel = 0;
  double speed = 0.0;

  long samples() const { return accel + cruise + decel; }
  double speed_at(long k) const {
    if (k <= 0 || k >= samples()) return 0.0;
    if (k <= accel) return speed * static_cast<double>(k) / static_cast<double>(accel);
    if (k <= accel + cruise) return speed;
    return speed * static_cast<double>(samples() - k) / static_cast<double>(decel);
  }
};

long ceil_count(double x) {
  // 0.2 / 0.002 evaluates to 100.00000000000001; that is still 100 samples.
  return static_cast<long>(std::ceil(x - 1e-9));
}

Leg plan_leg(double distance, const TrajectorySpec& s, double dt) {
  Leg leg;
  if (distance == 0.0) return leg;
  const double v = s.speed_setpoint;
  const double ramps = v * v / (2.0 * s.acceleration) + v * v / (2.0 * s.deceleration);
  double peak = v;
  if (distance < ramps) {
    peak = std::sqrt(2.0 * s.acceleration * s.deceleration * distance /
                     (s.acceleration + s.deceleration));
  }
  leg.accel = std::max(1L, ceil_count(peak / (s.acceleration * dt)));
  leg.decel = std::max(1L, ceil_count(peak / (s.deceleration * dt)));
  if (distance >= ramps) leg.cruise = std::max(0L, ceil_count((distance - ramps) / (v * dt)));
  const double area = dt * (0.5 * static_cast<double>(leg.accel) +
                            static_cast<double>(leg.cruise) +
                            0.5 * static_cast<double>(leg.decel));
  leg.speed = distance / area;
  return leg;
}

}  // namespace

void TrajectorySpec::validate() const {
  if (!(speed_setpoint > 0.0)) throw InvalidArgument("speed setpoint must be positive");
  if (!(acceleration > 0.0) || !(deceleration > 0.0))
    throw InvalidArgument("acceleration and deceleration must be positive");
  if (!(dwell_time >= 0.0)) throw InvalidArgument("dwell time must be non-negative");
  if (!std::isfinite(position_setpoint)) throw InvalidArgument("position setpoint must be finite");
}

Eigen::Index ReferenceProfile::index_of(double t) const {
  const auto k = static_cast<Eigen::Index>(std::llround(t / dt));
  return std::clamp<Eigen::Index>(k, 0, size() - 1);
}

ReferenceProfile generate_profile(const TrajectorySpec& spec, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("sample period must be positive");
  spec.validate();

  const double distance = std::abs(spec.position_setpoint);
  const double dir = spec.position_setpoint < 0.0 ? -1.0 : 1.0;
  const Leg leg = plan_leg(distance, spec, dt);
  const long dwell = std::lround(spec.dwell_time / dt);
  const bool returns = spec.return_to_zero && distance > 0.0;

  // Speed samples; the position follows by trapezoid integration.
  std::vector<double> speed;
  speed.reserve(static_cast<size_t>(2 * (leg.samples() + dwell) + 1));
  for (long k = 0; k < leg.samples(); ++k) speed.push_back(dir * leg.speed_at(k));
  for (long k = 0; k < dwell; ++k) speed.push_back(0.0);
  if (returns) {
    for (long k = 0; k < leg.samples(); ++k) speed.push_back(-dir * leg.speed_at(k));
    for (long k = 0; k < dwell; ++k) speed.push_back(0.0);
  }
  speed.push_back(0.0);

  ReferenceProfile out;
  out.dt = dt;
  out.speed = Eigen::Map<Eigen::VectorXd>(speed.data(), static_cast<Eigen::Index>(speed.size()));
  out.position = Eigen::VectorXd::Zero(out.speed.size());
  for (Eigen::Index k = 1; k < out.speed.size(); ++k)
    out.position(k) = out.position(k - 1) + 0.5 * dt * (out.speed(k - 1) + out.speed(k));

  // Integration round-off is O(n eps); pin the plateaus to their exact values.
  const long leg_end = leg.samples();
  if (distance > 0.0) {
    for (long k = leg_end; k <= leg_end + dwell && k < out.size(); ++k)
      out.position(k) = spec.position_setpoint;
    if (returns)
      for (long k = 2 * leg_end + dwell; k < out.size(); ++k) out.position(k) = 0.0;
  }

  auto t = [dt](long k) { return static_cast<double>(k) * dt; };
  ProfilePhases& ph = out.phases;
  ph.motion_start = 0.0;
  ph.accel_end = t(leg.accel);
  ph.cruise_end = t(leg.accel + leg.cruise);
  ph.decel_end = t(leg_end);
  ph.dwell_end = t(leg_end + dwell);
  if (returns) {
    const long r0 = leg_end + dwell;
    ph.return_accel_end = t(r0 + leg.accel);
    ph.return_cruise_end = t(r0 + leg.accel + leg.cruise);
    ph.return_decel_end = t(r0 + leg_end);
  } else {
    ph.return_accel_end = ph.return_cruise_end = ph.return_decel_end = ph.dwell_end;
  }
  ph.end = t(static_cast<long>(out.size()) - 1);

  out.target = spec.position_setpoint;
  out.peak_speed = dir * leg.speed;
  out.speed_setpoint = spec.speed_setpoint;
  out.returns = returns;
  return out;
}

ReferenceProfile bidirectional_step(double move, double dwell, double speed,
                                    double accel, double dt) {
  TrajectorySpec spec;
  spec.position_setpoint = move;
  spec.speed_setpoint = speed;
  spec.acceleration = accel;
  spec.deceleration = accel;
  spec.dwell_time = dwell;
  spec.return_to_zero = true;
  return generate_profile(spec, dt);
}

void write_csv(const ReferenceProfile& profile, std::ostream& out) {
  out << "t,r_pos,r_speed\n";
  out.precision(17);
  for (Eigen::Index k = 0; k < profile.size(); ++k)
    out << profile.time(k) << ',' << profile.position(k) << ',' << profile.speed(k) << '\n';
}

}  // namespace servotune
