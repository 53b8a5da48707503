#ifndef SERVOTUNE_REFGEN_HPP
#define SERVOTUNE_REFGEN_HPP

// Interpolation block: turns setpoints into sampled position/speed
// references. Phase boundaries are snapped to the sample grid, so the
// position reference is exactly the trapezoid integral of the speed
// reference and the final position equals the setpoint.

#include <Eigen/Dense>

#include <iosfwd>

namespace servotune {

struct TrajectorySpec {
  double position_setpoint = 0.0;  // m, signed
  double speed_setpoint = 0.2;     // m/s
  double acceleration = 5.0;       // m/s^2
  double deceleration = 5.0;       // m/s^2
  double dwell_time = 0.5;         // s, after each leg
  bool return_to_zero = true;

  void validate() const;
};

/// Sample-aligned timestamps [s] of the profile phases. Without a return leg
/// the return_* fields equal dwell_end.
struct ProfilePhases {
  double motion_start = 0.0;
  double accel_end = 0.0;
  double cruise_end = 0.0;
  double decel_end = 0.0;
  double dwell_end = 0.0;
  double return_accel_end = 0.0;
  double return_cruise_end = 0.0;
  double return_decel_end = 0.0;
  double end = 0.0;
};

struct ReferenceProfile {
  double dt = 1e-3;
  Eigen::VectorXd position;  // r^p [m]
  Eigen::VectorXd speed;     // r^s [m/s]
  ProfilePhases phases;
  double target = 0.0;      // position held during the first dwell [m]
  double peak_speed = 0.0;  // signed cruise speed actually used [m/s]
  double speed_setpoint = 0.0;
  bool returns = false;

  Eigen::Index size() const { return position.size(); }
  double time(Eigen::Index k) const { return static_cast<double>(k) * dt; }
  /// Nearest sample index of a phase timestamp.
  Eigen::Index index_of(double t) const;
};

/// Trapezoidal (or triangular when the move is too short to reach the speed
/// setpoint) profile with an optional mirrored return leg. Throws
/// InvalidArgument for dt <= 0 or an invalid spec.
ReferenceProfile generate_profile(const TrajectorySpec& spec, double dt);

/// Forward move, dwell, return to zero, terminal dwell; a = d = accel.
ReferenceProfile bidirectional_step(double move, double dwell, double speed,
                                    double accel, double dt);

/// CSV with header `t,r_pos,r_speed`.
void write_csv(const ReferenceProfile& profile, std::ostream& out);

}  // namespace servotune

#endif  // SERVOTUNE_REFGEN_HPP
