#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "servotune/errors.hpp"
#include "servotune/refgen.hpp"

using namespace servotune;

namespace {

TrajectorySpec spec(double P, double v, double a, double dwell, bool ret) {
  TrajectorySpec s;
  s.position_setpoint = P;
  s.speed_setpoint = v;
  s.acceleration = a;
  s.deceleration = a;
  s.dwell_time = dwell;
  s.return_to_zero = ret;
  return s;
}

// Cumulative trapezoid integral of the speed reference.
double max_integral_gap(const ReferenceProfile& r) {
  double x = r.position(0), gap = 0.0;
  for (Eigen::Index k = 1; k < r.size(); ++k) {
    x += 0.5 * r.dt * (r.speed(k - 1) + r.speed(k));
    gap = std::max(gap, std::abs(x - r.position(k)));
  }
  return gap;
}

}  // namespace

TEST(Refgen, TrapezoidKinematics) {
  const ReferenceProfile r = generate_profile(spec(0.5, 0.2, 2.0, 0.5, false), 1e-3);
  const ProfilePhases& ph = r.phases;
  EXPECT_NEAR(ph.accel_end - ph.motion_start, 0.1, 1e-12);
  EXPECT_NEAR(ph.decel_end - ph.cruise_end, 0.1, 1e-12);
  EXPECT_NEAR(ph.cruise_end - ph.accel_end, 2.4, 1e-9);
  EXPECT_NEAR(ph.decel_end - ph.motion_start, 2.6, 1e-9);
  EXPECT_NEAR(r.position(r.index_of(ph.accel_end)) - r.position(r.index_of(ph.motion_start)), 0.01, 1e-9);
  EXPECT_NEAR(r.peak_speed, 0.2, 1e-12);
  EXPECT_NEAR(r.position(r.size() - 1), 0.5, 1e-12);
  EXPECT_LT(max_integral_gap(r), 1e-9 * 0.5);
}

TEST(Refgen, TriangularFallback) {
  const ReferenceProfile r = generate_profile(spec(0.01, 1.0, 1.0, 0.1, false), 1e-3);
  EXPECT_NEAR(r.peak_speed, 0.1, 1e-9);
  EXPECT_NEAR(r.speed.maxCoeff(), 0.1, 1e-9);
  EXPECT_NEAR(r.phases.decel_end - r.phases.motion_start, 0.2, 1e-9);
  EXPECT_NEAR(r.position(r.size() - 1), 0.01, 1e-12);
  EXPECT_LT(max_integral_gap(r), 1e-9 * 0.01);
}

TEST(Refgen, ZeroMoveIsFlat) {
  for (bool ret : {false, true}) {
    const ReferenceProfile r = generate_profile(spec(0.0, 0.2, 5.0, 0.3, ret), 1e-3);
    EXPECT_GT(r.size(), 0);
    EXPECT_EQ(r.position.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(r.speed.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Refgen, ReturnLegMirrorsForwardLeg) {
  const ReferenceProfile r = generate_profile(spec(0.05, 0.2, 3.0, 0.2, true), 1e-3);
  const ProfilePhases& ph = r.phases;
  EXPECT_TRUE(r.returns);
  EXPECT_NEAR(r.position(r.size() - 1), 0.0, 1e-12);
  const Eigen::Index f0 = r.index_of(ph.motion_start), f1 = r.index_of(ph.decel_end);
  const Eigen::Index b0 = r.index_of(ph.dwell_end), b1 = r.index_of(ph.return_decel_end);
  ASSERT_EQ(f1 - f0, b1 - b0);
  for (Eigen::Index k = 0; k <= f1 - f0; ++k) {
    EXPECT_NEAR(r.speed(b0 + k), -r.speed(f0 + k), 1e-12);
    EXPECT_NEAR(r.position(b0 + k), 0.05 - r.position(f0 + k), 1e-12);
  }
}

TEST(Refgen, SpeedBoundedAndLegsMonotone) {
  for (double P : {0.003, 0.05, 0.5, -0.2}) {
    const ReferenceProfile r = generate_profile(spec(P, 0.2, 4.0, 0.1, true), 1e-3);
    EXPECT_LE(r.speed.cwiseAbs().maxCoeff(), 0.2 + 1e-12) << P;
    const Eigen::Index mid = r.index_of(r.phases.dwell_end);
    const double sgn = P > 0 ? 1.0 : -1.0;
    for (Eigen::Index k = 1; k <= mid; ++k) EXPECT_GE(sgn * (r.position(k) - r.position(k - 1)), -1e-15);
    for (Eigen::Index k = mid + 1; k < r.size(); ++k) EXPECT_LE(sgn * (r.position(k) - r.position(k - 1)), 1e-15);
    EXPECT_LT(max_integral_gap(r), 1e-9 * std::abs(P)) << P;
  }
}

TEST(Refgen, BidirectionalStep) {
  const ReferenceProfile r = bidirectional_step(0.5, 10.0, 0.2, 100.0, 1e-3);
  EXPECT_NEAR(r.target, 0.5, 1e-12);
  EXPECT_NEAR(r.position(r.size() - 1), 0.0, 1e-12);
  EXPECT_NEAR(r.phases.accel_end - r.phases.motion_start, 2e-3, 1e-12);
  EXPECT_NEAR(r.phases.dwell_end - r.phases.decel_end, 10.0, 1e-9);

  const ReferenceProfile adj = bidirectional_step(0.01, 0.0, 0.2, 100.0, 1e-3);
  EXPECT_NEAR(adj.phases.dwell_end, adj.phases.decel_end, 1e-12);
}

TEST(Refgen, RejectsBadInput) {
  EXPECT_THROW(generate_profile(spec(0.1, 0.2, 5.0, 0.5, true), 0.0), InvalidArgument);
  EXPECT_THROW(generate_profile(spec(0.1, -0.2, 5.0, 0.5, true), 1e-3), InvalidArgument);
  EXPECT_THROW(generate_profile(spec(0.1, 0.2, 0.0, 0.5, true), 1e-3), InvalidArgument);
  EXPECT_THROW(generate_profile(spec(0.1, 0.2, 5.0, -1.0, true), 1e-3), InvalidArgument);
}

TEST(Refgen, CsvHeader) {
  std::ostringstream os;
  write_csv(generate_profile(spec(0.01, 0.2, 5.0, 0.0, false), 1e-3), os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "t,r_pos,r_speed");
}
