#ifndef SERVOTUNE_SIMLOOP_HPP
#define SERVOTUNE_SIMLOOP_HPP

// Closed-loop simulation of the position/speed/current cascade around the
// continuous plant. Position and speed loops run at the controller period;
// the current PID runs at the integrator substep, where the plant is advanced
// by classical fixed-step RK4 with the voltage held constant.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "servotune/plant.hpp"
#include "servotune/refgen.hpp"

namespace servotune {

/// Position P gain and speed PI gains. Speed gains act on the controller
/// length unit (see SimConfig::length_unit).
struct GainVector {
  double Kp = 0.0;
  double Kv = 0.0;
  double Ki = 0.0;
  std::optional<double> Tn;  // integral time, Ki = Kv / Tn

  static GainVector from_tn(double Kp, double Kv, double Tn);

  /// Strict positivity and Tn consistency. Throws InvalidArgument.
  void validate() const;
};

struct CurrentControllerGains {
  double Kcp = 60.0;
  double Kci = 1000.0;
  double Kcd = 18.0;

  void validate() const;
};

enum class ControlMode { position, speed, current };
enum class PositionLoopMode { summed, full };
enum class SpeedController { pi, relay };

struct TorqueImpulse {
  double time = 0.0;    // s
  double torque = 0.0;  // N m on the load, held for one controller period
};

struct SimConfig {
  double controller_period = 1e-3;
  double substep = 1e-6;
  double voltage_limit = 48.0;  // V
  double current_limit = 10.0;  // A
  double derivative_filter = 100.0;  // current-loop derivative filter pole [rad/s]
  bool anti_windup = true;
  ControlMode mode = ControlMode::position;
  PositionLoopMode position_loop_mode = PositionLoopMode::summed;
  SpeedController speed_controller = SpeedController::pi;
  double relay_amplitude = 1.0;  // A, relay speed controller output
  double current_command = 0.0;  // A, reference in current-control mode
  // Measurement noise standard deviations (position m, speed m/s, current A).
  double noise_position = 0.0;
  double noise_speed = 0.0;
  double noise_current = 0.0;
  std::uint64_t noise_seed = 0;
  std::vector<TorqueImpulse> disturbances;
  bool rigid_plant = false;
  // Length unit of the position/speed controller signals [m]. The speed gains
  // are expressed per millimetre by default.
  double length_unit = 1e-3;
  // Time unit of the current-loop derivative gain [s].
  double derivative_time_unit = 1e-3;
  double divergence_threshold = 1e12;

  void validate() const;
  long substeps_per_period() const;
};

/// Uniformly sampled record of one closed-loop experiment, one row per
/// controller tick. Position/speed are linear (motor encoder side) and
/// include measurement noise; errors are reference minus measurement.
struct SimTrace {
  double dt = 1e-3;
  Eigen::VectorXd time;
  Eigen::VectorXd ref_position;
  Eigen::VectorXd position;
  Eigen::VectorXd ref_speed;
  Eigen::VectorXd speed;
  Eigen::VectorXd load_position;
  Eigen::VectorXd load_speed;
  Eigen::VectorXd motor_speed;  // rad/s
  Eigen::VectorXd current;
  Eigen::VectorXd current_ref;
  Eigen::VectorXd voltage;
  Eigen::VectorXd position_error;
  Eigen::VectorXd speed_error;
  bool diverged = false;
  double divergence_time = 0.0;

  Eigen::Index size() const { return time.size(); }
};

SimTrace simulate(const PlantParams& plant, const GainVector& gains,
                  const CurrentControllerGains& cc, const ReferenceProfile& profile,
                  const SimConfig& cfg);

struct StabilityReport {
  bool stable = false;
  // Ratio of the last-quarter to the second-quarter error envelope.
  double decay = 0.0;
};

/// Small position step; unstable when the run diverges, when the late error
/// envelope exceeds the early one, or when the current command is still
/// saturated in the last quarter (a bounded limit cycle).
StabilityReport stability_probe(const PlantParams& plant, const GainVector& gains,
                                const CurrentControllerGains& cc, const SimConfig& cfg);

/// CSV, one row per controller tick.
void write_csv(const SimTrace& trace, std::ostream& out);

std::string to_string(ControlMode mode);
std::string to_string(PositionLoopMode mode);
ControlMode parse_control_mode(const std::string& s);
PositionLoopMode parse_position_loop_mode(const std::string& s);

}  // namespace servotune

#endif  // SERVOTUNE_SIMLOOP_HPP
