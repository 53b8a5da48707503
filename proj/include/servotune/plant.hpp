#ifndef SERVOTUNE_PLANT_HPP
#define SERVOTUNE_PLANT_HPP

// Ball-screw servo drive model: PMSM q-axis electrical dynamics driving a
// two-mass (motor/load) drivetrain coupled through the axial stiffness Ks.

#include <Eigen/Dense>

#include <complex>
#include <string>
#include <vector>

#include "servotune/polynomial.hpp"

namespace servotune {

using Tf = TransferFunction<double>;

struct PlantParams {
  double Rs = 0.0;         // stator resistance [Ohm]
  double Ls = 0.0;         // stator inductance [H]
  double Kt = 0.0;         // torque constant
  double Kb = 0.0;         // back-EMF constant
  double Jm = 0.0;         // motor inertia [kg m^2]
  double Bm = 0.0;         // motor viscous damping [N m s/rad]
  double Jl = 0.0;         // load inertia [kg m^2]
  double Bml = 0.0;        // coupling damping [N m s/rad]
  double Bl = 0.0;         // load damping [N m s/rad]
  double Ks = 0.0;         // axial stiffness [N m/rad]
  double Q = 0.0;          // lead: linear travel per motor revolution [m/rev]
  double omega_max = 0.0;  // motor speed limit [rad/s]

  /// Throws ModelError if any invariant is violated.
  void validate() const;

  /// Linear travel per radian of motor rotation, Q / (2 pi).
  double meters_per_radian() const;
};

/// Motor, drivetrain and lead of the reference ball-screw axis
/// (8000 rpm speed limit).
PlantParams paper_table1_plant();

/// Omega_m / V_sq for a mechanical load impedance T_m / Omega_m:
///   Kt / (Kt*Kb + (Ls*s + Rs) * mech_load).
/// The load impedance is usually improper (e.g. J*s + B); only the result has
/// to be a valid rational function.
Tf motor_tf(const PlantParams& p, const Tf& mech_load);

struct DrivetrainTfs {
  Tf F1;  // Omega_m / T_m
  Tf F2;  // Omega_l / T_m
  Tf F3;  // Omega_l / Omega_m
};

/// Drivetrain transfer functions with the load torque set to zero. The
/// determinant of the displacement-domain matrix H(s) carries a factor s
/// (rigid-body mode); it is cancelled analytically so F1 and F2 relate
/// torque to angular velocity.
DrivetrainTfs drivetrain_tfs(const PlantParams& p);

/// Reduced determinant det(H(s)) / s, descending coefficients.
Poly<double> drivetrain_reduced_determinant(const PlantParams& p);

/// Voltage to load angular velocity. `approximate` replaces 1/F1 by the
/// rigid impedance (Jm + Jl)s + Bm; otherwise the exact M(s) F3(s) is
/// returned in reduced form.
Tf full_tf(const PlantParams& p, bool approximate);

struct StateSpaceModel {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd C;
  Eigen::MatrixXd D;
  std::vector<std::string> state_labels;

  Eigen::Index states() const { return A.rows(); }
  Eigen::Index inputs() const { return B.cols(); }
  Eigen::Index outputs() const { return C.rows(); }

  /// Throws ModelError on inconsistent dimensions.
  void check_dimensions() const;

  /// C (j w I - A)^{-1} B + D.
  Eigen::MatrixXcd freq_response(double omega) const;
};

/// Controllable canonical realization of a proper transfer function, with
/// the states rescaled by powers of a characteristic frequency so that badly
/// spread coefficients do not destroy the conditioning. Throws ModelError for
/// improper input.
StateSpaceModel to_state_space(const Tf& tf);

/// Index of each physical state in physical_state_model.
enum PlantState : int { kCurrent = 0, kMotorSpeed, kMotorAngle, kLoadSpeed, kLoadAngle };

/// Physical model with states (i_sq, w_m, th_m, w_l, th_l), inputs
/// (v_sq, tau_l) and all five states as outputs. With `rigid` set the axial
/// spring is removed and the load is locked to the motor: the model keeps
/// three states (i_sq, w, th) and the load outputs repeat the motor ones.
StateSpaceModel physical_state_model(const PlantParams& p, bool rigid = false);

}  // namespace servotune

#endif  // SERVOTUNE_PLANT_HPP
