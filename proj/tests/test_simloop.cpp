#include <gtest/gtest.h>

#include <cmath>

#include "servotune/errors.hpp"
#include "servotune/experiment.hpp"
#include "servotune/metrics.hpp"
#include "servotune/simloop.hpp"

using namespace servotune;

namespace {

const GainVector kDeskOptimum{150.0, 0.35, 90.0, std::nullopt};

TrajectorySpec move(double P, double v, double a, double dwell, bool ret = true) {
  TrajectorySpec s;
  s.position_setpoint = P;
  s.speed_setpoint = v;
  s.acceleration = a;
  s.deceleration = a;
  s.dwell_time = dwell;
  s.return_to_zero = ret;
  return s;
}

}  // namespace

TEST(Simloop, ZeroProfileGivesZeroTraces) {
  const ReferenceProfile r = generate_profile(move(0.0, 0.2, 5.0, 0.2), 1e-3);
  const SimTrace t = simulate(paper_table1_plant(), kDeskOptimum, {}, r, {});
  ASSERT_EQ(t.size(), r.size());
  EXPECT_FALSE(t.diverged);
  for (const Eigen::VectorXd* v : {&t.position, &t.speed, &t.current, &t.voltage, &t.position_error,
                                   &t.speed_error, &t.load_position, &t.current_ref})
    EXPECT_EQ(v->cwiseAbs().maxCoeff(), 0.0);
}

TEST(Simloop, ErrorsAreReferenceMinusMeasurement) {
  const Experiment ex;
  const SimTrace t = ex.trace(kDeskOptimum);
  EXPECT_EQ(t.position_error, t.ref_position - t.position);
  EXPECT_EQ(t.speed_error, t.ref_speed - t.speed);
}

TEST(Simloop, DeterministicIncludingNoise) {
  Experiment ex;
  ex.sim.noise_position = 1e-7;
  ex.sim.noise_speed = 1e-5;
  ex.sim.noise_seed = 42;
  const SimTrace a = ex.trace(kDeskOptimum), b = ex.trace(kDeskOptimum);
  EXPECT_EQ(a.position, b.position);
  EXPECT_EQ(a.voltage, b.voltage);
  ex.sim.noise_seed = 43;
  EXPECT_NE(ex.trace(kDeskOptimum).position, a.position);
}

TEST(Simloop, SubstepHalvingConverges) {
  Experiment ex;
  const SimTrace a = ex.trace(kDeskOptimum);
  const double fa = cost(extract_metrics(a, ex.profile(), ex.metric_options), ex.weights);
  ex.sim.substep = 5e-7;
  const SimTrace b = ex.trace(kDeskOptimum);
  const double fb = cost(extract_metrics(b, ex.profile(), ex.metric_options), ex.weights);
  EXPECT_LT(std::abs(a.position(a.size() - 1) - b.position(b.size() - 1)), 1e-6);
  EXPECT_LT(std::abs(fa - fb) / fa, 0.005);
}

TEST(Simloop, SaturationsHold) {
  Experiment ex;
  ex.trajectory = move(0.05, 0.5, 200.0, 0.1);
  const PlantParams p = ex.plant;
  const SimTrace t = ex.trace({400.0, 2.0, 900.0, std::nullopt});
  ASSERT_FALSE(t.diverged);
  EXPECT_LE(t.voltage.cwiseAbs().maxCoeff(), ex.sim.voltage_limit);
  EXPECT_LE(t.current_ref.cwiseAbs().maxCoeff(), ex.sim.current_limit);
  EXPECT_LE(t.motor_speed.cwiseAbs().maxCoeff(), p.omega_max * (1.0 + 1e-9));
  EXPECT_NEAR(t.current_ref.cwiseAbs().maxCoeff(), ex.sim.current_limit, 1e-12);
}

TEST(Simloop, DwellErrorVanishes) {
  const Experiment ex;
  const ReferenceProfile r = ex.profile();
  const SimTrace t = ex.trace(kDeskOptimum);
  const Eigen::Index e0 = r.index_of(r.phases.decel_end), e1 = r.index_of(r.phases.dwell_end);
  const Eigen::Index len = (e1 - e0) / 5;
  EXPECT_LT(t.position_error.segment(e1 - len, len).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Simloop, GridOptimalGainsTrackLongMove) {
  const ReferenceProfile r = bidirectional_step(0.5, 1.0, 0.2, 100.0, 1e-3);
  const SimTrace t = simulate(paper_table1_plant(), {225.0, 0.39, 90.0, std::nullopt}, {}, r, {});
  ASSERT_FALSE(t.diverged);
  EXPECT_LT(std::abs(t.position_error(t.size() - 1)), 1e-3);
  const Eigen::Index k = r.index_of(r.phases.dwell_end) - 1;
  EXPECT_LT(std::abs(t.position_error(k)), 1e-3);
}

TEST(Simloop, SpeedModeRemovesSteadyStateError) {
  SimConfig cfg;
  cfg.mode = ControlMode::speed;
  const ReferenceProfile r = generate_profile(move(0.2, 0.05, 1.0, 0.0, false), 1e-3);
  const SimTrace t = simulate(paper_table1_plant(), {1.0, 0.35, 90.0, std::nullopt}, {}, r, cfg);
  ASSERT_FALSE(t.diverged);
  const Eigen::Index c0 = r.index_of(r.phases.accel_end), c1 = r.index_of(r.phases.cruise_end);
  const double early = t.speed_error.segment(c0, 50).cwiseAbs().maxCoeff();
  const double late = t.speed_error.segment(c1 - 100, 100).cwiseAbs().maxCoeff();
  EXPECT_LT(late, 1e-6);
  EXPECT_LT(late, early);
}

TEST(Simloop, TorqueImpulseIsRejected) {
  Experiment ex;
  ex.sim.disturbances.push_back({0.2, 0.5});
  const SimTrace t = ex.trace(kDeskOptimum);
  const SimTrace clean = Experiment{}.trace(kDeskOptimum);
  EXPECT_NE(t.position, clean.position);
  EXPECT_LT(std::abs(t.position_error(t.size() - 1)), 1e-4);
}

TEST(Simloop, StabilityProbe) {
  const PlantParams p = paper_table1_plant();
  EXPECT_TRUE(stability_probe(p, kDeskOptimum, {}, {}).stable);
  EXPECT_TRUE(stability_probe(p, {1e-3, 1e-3, 1e-3, std::nullopt}, {}, {}).stable);
  EXPECT_FALSE(stability_probe(p, {150.0, 50.0, 90.0, std::nullopt}, {}, {}).stable);
}

TEST(Simloop, DivergenceIsReportedNotThrown) {
  SimConfig cfg;
  cfg.voltage_limit = 1e9;
  cfg.current_limit = 1e9;
  cfg.divergence_threshold = 1e6;
  const ReferenceProfile r = generate_profile(move(0.005, 0.2, 100.0, 0.2, false), 1e-3);
  const SimTrace t = simulate(paper_table1_plant(), {4000.0, 50.0, 900.0, std::nullopt}, {}, r, cfg);
  EXPECT_TRUE(t.diverged);
  EXPECT_GT(t.divergence_time, 0.0);
  EXPECT_TRUE(extract_metrics(t, r).diverged);
}

TEST(Simloop, ConfigValidation) {
  SimConfig cfg;
  cfg.substep = 3e-7;  // does not divide 1 ms
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.current_limit = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  EXPECT_THROW(GainVector({0.0, 1.0, 1.0, std::nullopt}).validate(), InvalidArgument);
  const GainVector g = GainVector::from_tn(1.0, 2.0, 4.0);
  EXPECT_DOUBLE_EQ(g.Ki, 0.5);
  EXPECT_NO_THROW(g.validate());
  GainVector bad = g;
  bad.Ki = 0.6;
  EXPECT_THROW(bad.validate(), InvalidArgument);
}
