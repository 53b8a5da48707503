#include "servotune/plant.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace servotune {

namespace {

Poly<double> poly(std::initializer_list<double> c) {
  Poly<double> p(static_cast<Eigen::Index>(c.size()));
  Eigen::Index i = 0;
  for (double v : c) p(i++) = v;
  return p;
}

}  // namespace

void PlantParams::validate() const {
  std::ostringstream bad;
  auto positive = [&](const char* name, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) bad << ' ' << name << '=' << v;
  };
  auto nonneg = [&](const char* name, double v) {
    if (!(v >= 0.0) || !std::isfinite(v)) bad << ' ' << name << '=' << v;
  };
  positive("Rs", Rs);
  positive("Ls", Ls);
  positive("Kt", Kt);
  positive("Kb", Kb);
  positive("Jm", Jm);
  positive("Jl", Jl);
  positive("Ks", Ks);
  positive("Q", Q);
  positive("omega_max", omega_max);
  nonneg("Bm", Bm);
  nonneg("Bml", Bml);
  nonneg("Bl", Bl);
  if (!bad.str().empty()) throw ModelError("invalid plant parameters:" + bad.str());
}

double PlantParams::meters_per_radian() const { return Q / (2.0 * std::numbers::pi); }

PlantParams paper_table1_plant() {
  PlantParams p;
  p.Rs = 9.02;
  p.Ls = 0.0187;
  p.Kt = 0.515;
  p.Kb = 0.55;
  p.Jm = 0.27e-4;
  p.Bm = 0.0074;
  p.Jl = 6.53e-4;
  p.Bml = 0.014;
  p.Bl = 0.0;
  p.Ks = 3e7;
  p.Q = 1.8e-2;
  p.omega_max = 8000.0 * 2.0 * std::numbers::pi / 60.0;
  return p;
}

Tf motor_tf(const PlantParams& p, const Tf& mech_load) {
  // Kt / (Kt Kb + (Ls s + Rs) n/d) = Kt d / (Kt Kb d + (Ls s + Rs) n)
  const Poly<double> electrical = poly({p.Ls, p.Rs});
  Poly<double> den = poly_add(poly_scale(mech_load.den, p.Kt * p.Kb),
                              poly_mul(electrical, mech_load.num));
  if (poly_is_zero(den)) throw ModelError("motor transfer function has a zero denominator");
  return {poly_scale(mech_load.den, p.Kt), den};
}

Poly<double> drivetrain_reduced_determinant(const PlantParams& p) {
  // det H(s) = s * (JmJl s^3 + ... + (Bm + Bl) Ks); the s^0 term Ks^2 - Ks^2
  // vanishes identically.
  return poly({p.Jm * p.Jl,
               p.Jm * (p.Bl + p.Bml) + p.Jl * (p.Bm + p.Bml),
               (p.Jm + p.Jl) * p.Ks + p.Bm * p.Bl + p.Bm * p.Bml + p.Bml * p.Bl,
               (p.Bm + p.Bl) * p.Ks});
}

DrivetrainTfs drivetrain_tfs(const PlantParams& p) {
  p.validate();
  const Poly<double> load = poly({p.Jl, p.Bl + p.Bml, p.Ks});
  const Poly<double> coupling = poly({p.Bml, p.Ks});
  const Poly<double> det = drivetrain_reduced_determinant(p);
  return {Tf(load, det), Tf(coupling, det), Tf(coupling, load)};
}

Tf full_tf(const PlantParams& p, bool approximate) {
  p.validate();
  const auto [F1, F2, F3] = drivetrain_tfs(p);
  if (approximate) {
    const Tf rigid_load(poly({p.Jm + p.Jl, p.Bm}), poly({1.0}));
    return motor_tf(p, rigid_load) * F3;
  }
  // M(s) F3(s) with M built on 1/F1 = det/load; the load polynomial cancels:
  //   Kt (Bml s + Ks) / (Kt Kb load + (Ls s + Rs) det)
  const Poly<double> electrical = poly({p.Ls, p.Rs});
  const Poly<double> den = poly_add(poly_scale(F1.num, p.Kt * p.Kb),
                                    poly_mul(electrical, F1.den));
  return {poly_scale(F3.num, p.Kt), den};
}

void StateSpaceModel::check_dimensions() const {
  const bool ok = A.rows() == A.cols() && B.rows() == A.rows() &&
                  C.cols() == A.cols() && D.rows() == C.rows() &&
                  D.cols() == B.cols() &&
                  static_cast<Eigen::Index>(state_labels.size()) == A.rows();
  if (!ok) throw ModelError("state-space model has inconsistent dimensions");
}

Eigen::MatrixXcd StateSpaceModel::freq_response(double omega) const {
  const Eigen::Index n = states();
  Eigen::MatrixXcd resolvent = -A.cast<std::complex<double>>();
  resolvent.diagonal().array() += std::complex<double>(0.0, omega);
  Eigen::MatrixXcd h = D.cast<std::complex<double>>();
  if (n > 0)
    h += C.cast<std::complex<double>>() *
         resolvent.partialPivLu().solve(B.cast<std::complex<double>>());
  return h;
}

StateSpaceModel to_state_space(const Tf& tf) {
  if (!tf.proper()) throw ModelError("cannot realize an improper transfer function");
  const Tf m = tf.monic();
  const Eigen::Index n = m.den_degree();

  StateSpaceModel ss;
  Poly<double> num = Poly<double>::Zero(n + 1);
  num.tail(m.num.size()) = m.num;
  ss.D = Eigen::MatrixXd::Constant(1, 1, num(0));
  if (n == 0) {
    ss.A.resize(0, 0);
    ss.B.resize(0, 1);
    ss.C.resize(1, 0);
    return ss;
  }

  // s = w0 * sigma with w0 taken from the highest nonzero denominator
  // coefficient so that the scaled coefficients are O(1).
  double w0 = 1.0;
  for (Eigen::Index k = n; k >= 1; --k) {
    if (m.den(k) != 0.0) {
      w0 = std::pow(std::abs(m.den(k)), 1.0 / static_cast<double>(k));
      break;
    }
  }

  Eigen::VectorXd a(n);
  Eigen::VectorXd c(n);
  double scale = 1.0;
  for (Eigen::Index k = 1; k <= n; ++k) {
    scale *= w0;
    a(k - 1) = m.den(k) / scale;
    c(k - 1) = (num(k) - num(0) * m.den(k)) / scale;
  }

  Eigen::MatrixXd Ac = Eigen::MatrixXd::Zero(n, n);
  Ac.row(0) = -a.transpose();
  if (n > 1) Ac.bottomLeftCorner(n - 1, n - 1).setIdentity();
  ss.A = w0 * Ac;
  ss.B = Eigen::MatrixXd::Zero(n, 1);
  ss.B(0, 0) = w0;
  ss.C = c.transpose();
  for (Eigen::Index k = 0; k < n; ++k) ss.state_labels.push_back("x" + std::to_string(k + 1));
  return ss;
}

StateSpaceModel physical_state_model(const PlantParams& p, bool rigid) {
  p.validate();
  StateSpaceModel ss;
  if (rigid) {
    const double J = p.Jm + p.Jl;
    ss.A = Eigen::MatrixXd::Zero(3, 3);
    ss.A << -p.Rs / p.Ls, -p.Kb / p.Ls, 0.0,
            p.Kt / J, -(p.Bm + p.Bl) / J, 0.0,
            0.0, 1.0, 0.0;
    ss.B = Eigen::MatrixXd::Zero(3, 2);
    ss.B(0, 0) = 1.0 / p.Ls;
    ss.B(1, 1) = 1.0 / J;
    ss.C = Eigen::MatrixXd::Zero(5, 3);
    ss.C(kCurrent, 0) = 1.0;
    ss.C(kMotorSpeed, 1) = 1.0;
    ss.C(kMotorAngle, 2) = 1.0;
    ss.C(kLoadSpeed, 1) = 1.0;
    ss.C(kLoadAngle, 2) = 1.0;
    ss.D = Eigen::MatrixXd::Zero(5, 2);
    ss.state_labels = {"i_sq", "omega", "theta"};
    return ss;
  }

  ss.A = Eigen::MatrixXd::Zero(5, 5);
  ss.A(kCurrent, kCurrent) = -p.Rs / p.Ls;
  ss.A(kCurrent, kMotorSpeed) = -p.Kb / p.Ls;

  ss.A(kMotorSpeed, kCurrent) = p.Kt / p.Jm;
  ss.A(kMotorSpeed, kMotorSpeed) = -(p.Bm + p.Bml) / p.Jm;
  ss.A(kMotorSpeed, kMotorAngle) = -p.Ks / p.Jm;
  ss.A(kMotorSpeed, kLoadSpeed) = p.Bml / p.Jm;
  ss.A(kMotorSpeed, kLoadAngle) = p.Ks / p.Jm;

  ss.A(kMotorAngle, kMotorSpeed) = 1.0;

  ss.A(kLoadSpeed, kMotorSpeed) = p.Bml / p.Jl;
  ss.A(kLoadSpeed, kMotorAngle) = p.Ks / p.Jl;
  ss.A(kLoadSpeed, kLoadSpeed) = -(p.Bl + p.Bml) / p.Jl;
  ss.A(kLoadSpeed, kLoadAngle) = -p.Ks / p.Jl;

  ss.A(kLoadAngle, kLoadSpeed) = 1.0;

  ss.B = Eigen::MatrixXd::Zero(5, 2);
  ss.B(kCurrent, 0) = 1.0 / p.Ls;
  ss.B(kLoadSpeed, 1) = 1.0 / p.Jl;
  ss.C = Eigen::MatrixXd::Identity(5, 5);
  ss.D = Eigen::MatrixXd::Zero(5, 2);
  ss.state_labels = {"i_sq", "omega_m", "theta_m", "omega_l", "theta_l"};
  return ss;
}

}  // namespace servotune
