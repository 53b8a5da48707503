#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "servotune/plant.hpp"

using namespace servotune;

namespace {

Poly<double> poly(std::initializer_list<double> c) {
  Poly<double> p(static_cast<Eigen::Index>(c.size()));
  Eigen::Index i = 0;
  for (double v : c) p(i++) = v;
  return p;
}

// Load angular velocity per volt from the two-mass equations, with the load
// eliminated by hand so nothing cancels numerically.
std::complex<long double> direct_response(const PlantParams& p, double w) {
  using C = std::complex<long double>;
  const C s(0.0L, w);
  const long double Jm = p.Jm, Jl = p.Jl, Bm = p.Bm, Bl = p.Bl, Bml = p.Bml, Ks = p.Ks;
  const C spring = Bml * s + Ks;
  const C den = Jl * s * s + (Bl + Bml) * s + Ks;
  const C f3 = spring / den;                                  // Omega_l / Omega_m
  const C z = Jm * s + Bm + spring * (Jl * s + Bl) / den;     // T_m / Omega_m
  const C motor = static_cast<long double>(p.Kt) /
                  (static_cast<long double>(p.Kt) * p.Kb + (static_cast<long double>(p.Ls) * s + static_cast<long double>(p.Rs)) * z);
  return motor * f3;
}

}  // namespace

TEST(Plant, StaticGainMatchesClosedForm) {
  const PlantParams p = paper_table1_plant();
  const double expected = 1.4714369796398836;  // 0.515 / (0.515*0.55 + 9.02*0.0074)
  EXPECT_NEAR(full_tf(p, false).dc_gain(), expected, 1e-9 * expected);
  EXPECT_NEAR(full_tf(p, true).dc_gain(), expected, 1e-9 * expected);
}

TEST(Plant, LoadFollowsMotorAtDc) {
  const DrivetrainTfs d = drivetrain_tfs(paper_table1_plant());
  EXPECT_NEAR(d.F3.dc_gain(), 1.0, 1e-12);
}

TEST(Plant, F3IsTheSpringDamperLowPass) {
  const PlantParams p = paper_table1_plant();
  const DrivetrainTfs d = drivetrain_tfs(p);
  for (double w : {1.0, 1e3, 2.143e5, 1e6}) {
    const std::complex<double> s(0.0, w);
    const std::complex<double> ref = (p.Bml * s + p.Ks) / (p.Jl * s * s + (p.Bl + p.Bml) * s + p.Ks);
    EXPECT_NEAR(std::abs(d.F3(s) - ref), 0.0, 1e-9 * std::abs(ref)) << w;
  }
}

TEST(Plant, ReducedDeterminantHasNoRigidRoot) {
  const PlantParams p = paper_table1_plant();
  const Poly<double> det = drivetrain_reduced_determinant(p);
  EXPECT_EQ(poly_degree(det), 3);
  // constant term: Ks (Bm + Bl)
  EXPECT_NEAR(det(3), p.Ks * (p.Bm + p.Bl), 1e-9 * p.Ks * (p.Bm + p.Bl));
  EXPECT_NEAR(det(0), p.Jm * p.Jl, 1e-18);
}

TEST(Plant, ExactAndApproximateAgreeBelowOneKilohertz) {
  const PlantParams p = paper_table1_plant();
  const Tf exact = full_tf(p, false);
  const Tf approx = full_tf(p, true);
  for (int k = 0; k <= 1000; ++k) {
    const double w = 2.0 * std::numbers::pi * k;
    const double a = std::abs(exact.freq_response(w));
    const double b = std::abs(approx.freq_response(w));
    EXPECT_LT(std::abs(a - b) / b, 0.01) << k << " Hz";
  }
}

TEST(Plant, ResonanceNearSpringOverLoadInertia) {
  const PlantParams p = paper_table1_plant();
  const double wn = std::sqrt(p.Ks / p.Jl);
  EXPECT_NEAR(wn, 2.1434e5, 5.0);
  const auto poles = drivetrain_tfs(p).F3.poles();
  for (Eigen::Index i = 0; i < poles.size(); ++i) EXPECT_NEAR(std::abs(poles(i)), wn, 1e-6 * wn);
}

TEST(Plant, TransferFunctionMatchesDirectSolve) {
  const PlantParams p = paper_table1_plant();
  const Tf g = full_tf(p, false);
  for (double w = 1e-1; w <= 1e5; w *= 3.0) {
    const auto r = direct_response(p, w);
    const std::complex<double> ref(static_cast<double>(r.real()), static_cast<double>(r.imag()));
    EXPECT_LT(std::abs(g.freq_response(w) - ref), 1e-9 * std::abs(ref)) << w;
  }
}

TEST(Plant, PhysicalModelMatchesTransferFunction) {
  const PlantParams p = paper_table1_plant();
  const StateSpaceModel ss = physical_state_model(p);
  ss.check_dimensions();
  EXPECT_EQ(ss.states(), 5);
  EXPECT_EQ(ss.inputs(), 2);
  const Tf g = full_tf(p, false);
  for (double w = 1e-1; w <= 1e5; w *= 2.0) {
    const auto ref = g.freq_response(w);
    const auto h = ss.freq_response(w)(kLoadSpeed, 0);
    EXPECT_LT(std::abs(h - ref), 1e-6 * std::abs(ref)) << w;
  }
}

TEST(Plant, CanonicalRealizationMatchesTransferFunction) {
  const Tf g = full_tf(paper_table1_plant(), false);
  const StateSpaceModel ss = to_state_space(g);
  EXPECT_EQ(ss.states(), g.den_degree());
  for (double w = 1e-1; w <= 1e5; w *= 2.0) {
    const auto ref = g.freq_response(w);
    EXPECT_LT(std::abs(ss.freq_response(w)(0, 0) - ref), 1e-9 * std::abs(ref)) << w;
  }
}

TEST(Plant, PhysicalModelIsStableWithOneMarginalMode) {
  const StateSpaceModel ss = physical_state_model(paper_table1_plant());
  const Eigen::VectorXcd ev = ss.A.eigenvalues();
  int marginal = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) < 1e-6) ++marginal;
    else EXPECT_LT(ev(i).real(), 0.0);
  }
  EXPECT_EQ(marginal, 1);  // position integrator
}

TEST(Plant, RigidModelHasThreeStates) {
  const PlantParams p = paper_table1_plant();
  const StateSpaceModel ss = physical_state_model(p, true);
  EXPECT_EQ(ss.states(), 3);
  EXPECT_EQ(ss.outputs(), 5);
  const Tf rigid = motor_tf(p, Tf(poly({p.Jm + p.Jl, p.Bm + p.Bl}), poly({1.0})));
  for (double w : {1.0, 100.0, 1e4}) {
    const auto ref = rigid.freq_response(w);
    EXPECT_LT(std::abs(ss.freq_response(w)(kLoadSpeed, 0) - ref), 1e-9 * std::abs(ref));
  }
}

TEST(Plant, MotorTfWithRigidLoad) {
  const PlantParams p = paper_table1_plant();
  const Tf load(poly({p.Jm, p.Bm}), poly({1.0}));
  const Tf m = motor_tf(p, load);
  for (double w : {0.0, 10.0, 1e3, 1e5}) {
    const std::complex<double> s(0.0, w);
    const auto ref = p.Kt / (p.Kt * p.Kb + (p.Ls * s + p.Rs) * (p.Jm * s + p.Bm));
    EXPECT_LT(std::abs(m(s) - ref), 1e-12 * std::abs(ref));
  }
}

TEST(Plant, CancelFactorDividesOutCommonRoot) {
  // (s+1)(s+2) / ((s+1)(s+3))
  const Tf tf(poly({1.0, 3.0, 2.0}), poly({1.0, 4.0, 3.0}));
  const Tf r = cancel_factor(tf, poly({1.0, 1.0}));
  ASSERT_EQ(r.num.size(), 2);
  ASSERT_EQ(r.den.size(), 2);
  EXPECT_NEAR(r.num(1), 2.0, 1e-14);
  EXPECT_NEAR(r.den(1), 3.0, 1e-14);
  EXPECT_THROW(cancel_factor(tf, poly({1.0, 5.0})), ModelError);
}

TEST(Plant, ConstantTransferFunctionHasNoStates) {
  const StateSpaceModel ss = to_state_space(Tf::constant(2.5));
  EXPECT_EQ(ss.states(), 0);
  EXPECT_DOUBLE_EQ(ss.D(0, 0), 2.5);
}

TEST(Plant, ImproperTransferFunctionRejected) {
  EXPECT_THROW(to_state_space(Tf(poly({1.0, 0.0}), poly({1.0}))), ModelError);
}

TEST(Plant, InvalidParametersRejected) {
  PlantParams p = paper_table1_plant();
  p.Ks = -1.0;
  EXPECT_THROW(p.validate(), ModelError);
  p = paper_table1_plant();
  p.Ls = 0.0;
  EXPECT_THROW(full_tf(p, false), ModelError);
  EXPECT_NEAR(paper_table1_plant().meters_per_radian(), 1.8e-2 / (2.0 * std::numbers::pi), 1e-15);
}
