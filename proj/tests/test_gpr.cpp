#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gp_oracle.hpp"
#include "servotune/gpr.hpp"

using namespace servotune;

namespace {

using Hd = GpHyperparams<double>;

Hd to_hyper(const oracle::Hyper& h) {
  Hd g;
  g.sigma_f = static_cast<double>(h.sf);
  g.sigma_w = static_cast<double>(h.sw);
  g.lengthscales.resize(static_cast<Eigen::Index>(h.ell.size()));
  for (size_t i = 0; i < h.ell.size(); ++i) g.lengthscales(static_cast<Eigen::Index>(i)) = static_cast<double>(h.ell[i]);
  return g;
}

Dataset<double> to_data(const oracle::Case& c) {
  Dataset<double> d;
  const auto m = static_cast<Eigen::Index>(c.X.size()), n = static_cast<Eigen::Index>(c.X[0].size());
  d.X.resize(m, n);
  d.y.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) d.X(i, j) = static_cast<double>(c.X[i][j]);
    d.y(i) = static_cast<double>(c.y[i]);
  }
  return d;
}

Hd iso(double sf, double ell, double sw, int d) {
  Hd h;
  h.sigma_f = sf;
  h.sigma_w = sw;
  h.lengthscales = Eigen::VectorXd::Constant(d, ell);
  return h;
}

double tol(long double ref) { return 1e-8 * std::max(1.0, std::abs(static_cast<double>(ref))); }

}  // namespace

TEST(Gpr, MatchesDenseOracle) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  for (int rep = 0; rep < 50; ++rep) {
    const oracle::Case c = oracle::random_case(rng, 3, 50);
    const oracle::Gp ref(c.X, c.y, c.h);
    const auto g = fit(to_data(c), to_hyper(c.h));
    ASSERT_EQ(g.jitter, 0.0);
    EXPECT_NEAR(nlml(g), static_cast<double>(ref.nlml()), tol(ref.nlml())) << rep;
    for (int q = 0; q < 20; ++q) {
      oracle::Vec x{u(rng), u(rng), u(rng)};
      if (q < 3) x = c.X[static_cast<size_t>(q) % c.X.size()];
      const auto [mu, var] = ref.predict(x);
      const Eigen::Vector3d xe(static_cast<double>(x[0]), static_cast<double>(x[1]), static_cast<double>(x[2]));
      const Prediction<double> p = predict(g, xe);
      EXPECT_NEAR(p.mean, static_cast<double>(mu), tol(mu)) << rep << ' ' << q;
      EXPECT_NEAR(p.var, static_cast<double>(var), tol(var)) << rep << ' ' << q;
      EXPECT_GE(p.var, -1e-12);
      EXPECT_LE(p.var, g.hyper.sigma_f * g.hyper.sigma_f + 1e-10);
    }
  }
}

TEST(Gpr, KernelIsSymmetricAndPsd) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Hd h = iso(1.3, 0.4, 1e-3, 3);
  Eigen::MatrixXd X(30, 3);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = u(rng);
  const Eigen::MatrixXd K = gram(X, X, h);
  EXPECT_EQ(K, K.transpose());
  EXPECT_NEAR(K(0, 0), 1.3 * 1.3, 1e-15);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K).eigenvalues();
  EXPECT_GT(ev.minCoeff(), -1e-12);
  EXPECT_EQ(kernel(X.row(1), X.row(2), h), kernel(X.row(2), X.row(1).transpose(), h));
}

TEST(Gpr, InterpolatesWithSmallNoise) {
  Dataset<double> d;
  d.X = Eigen::VectorXd::LinSpaced(8, 0.0, 1.0);
  d.y = (3.0 * d.X.col(0)).array().sin();
  const auto g = fit(d, iso(1.0, 0.3, 1e-6, 1));
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const auto p = predict(g, d.X.row(i).transpose());
    EXPECT_NEAR(p.mean, d.y(i), 1e-6);
    EXPECT_LT(p.var, 1e-8);
  }
}

TEST(Gpr, RevertsToPriorFarAway) {
  Dataset<double> d;
  d.X = Eigen::VectorXd::LinSpaced(5, 0.0, 1.0);
  d.y = Eigen::VectorXd::Constant(5, 2.0);
  const auto g = fit(d, iso(1.5, 0.2, 1e-3, 1));
  const auto p = predict(g, Eigen::VectorXd::Constant(1, 50.0));
  EXPECT_NEAR(p.mean, 0.0, 1e-12);
  EXPECT_NEAR(p.var, 2.25, 1e-12);
}

TEST(Gpr, BatchPredictIsBitwiseIdentical) {
  std::mt19937_64 rng(11);
  const oracle::Case c = oracle::random_case(rng, 3, 40);
  const auto g = fit(to_data(c), to_hyper(c.h));
  Eigen::MatrixXd Q = Eigen::MatrixXd::Random(25, 3);
  const auto batch = predict(g, Q);
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    const auto p = predict(g, Q.row(i).transpose());
    EXPECT_EQ(batch[static_cast<size_t>(i)].mean, p.mean);
    EXPECT_EQ(batch[static_cast<size_t>(i)].var, p.var);
  }
}

TEST(Gpr, SinglePointNlmlClosedForm) {
  Dataset<double> d;
  d.X = Eigen::MatrixXd::Zero(1, 2);
  d.y = Eigen::VectorXd::Constant(1, 0.7);
  const Hd h = iso(1.2, 0.5, 0.1, 2);
  const double s2 = 1.44 + 0.01;
  const double ref = 0.5 * 0.49 / s2 + 0.5 * std::log(2.0 * std::numbers::pi * s2);
  EXPECT_NEAR(nlml(d, h), ref, 1e-14);
}

TEST(Gpr, DuplicateInputsNeedNoise) {
  Dataset<double> d;
  d.X = Eigen::MatrixXd::Zero(3, 1);
  d.y = Eigen::Vector3d(1.0, 1.0, 1.0);
  const auto g = fit(d, iso(1.0, 0.5, 1e-8, 1));
  EXPECT_GT(g.jitter, 0.0);
  EXPECT_TRUE(std::isfinite(predict(g, Eigen::VectorXd::Zero(1)).mean));
}

TEST(Gpr, RecoversLengthscale) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  std::normal_distribution<double> n(0.0, 1.0);
  const Hd truth = iso(1.0, 0.5, 0.05, 1);
  Dataset<double> d;
  d.X.resize(80, 1);
  for (Eigen::Index i = 0; i < 80; ++i) d.X(i) = u(rng);
  Eigen::MatrixXd K = gram(d.X, d.X, truth);
  K.diagonal().array() += truth.sigma_w * truth.sigma_w;
  const Eigen::MatrixXd L = K.llt().matrixL();
  Eigen::VectorXd z(80);
  for (Eigen::Index i = 0; i < 80; ++i) z(i) = n(rng);
  d.y = L * z;
  const Hd start = iso(0.3, 2.0, 0.3, 1);
  const Hd h = fit_hyperparams(d, start);
  EXPECT_GT(h.lengthscales(0), 0.25);
  EXPECT_LT(h.lengthscales(0), 1.0);
  EXPECT_LE(nlml(d, h), nlml(d, start));
}

TEST(Gpr, ConstantTargetsFit) {
  Dataset<double> d;
  d.X = Eigen::MatrixXd::Random(10, 3).cwiseAbs();
  d.y = Eigen::VectorXd::Zero(10);
  const Hd h = fit_hyperparams(d, iso(1.0, 0.3, 1e-2, 3));
  EXPECT_NO_THROW(h.validate());
  const auto p = predict(fit(d, h), Eigen::Vector3d(0.5, 0.5, 0.5));
  EXPECT_NEAR(p.mean, 0.0, 1e-9);
}

TEST(Gpr, LongDoubleAgreesWithDouble) {
  std::mt19937_64 rng(23);
  const oracle::Case c = oracle::random_case(rng, 3, 30);
  const Dataset<double> dd = to_data(c);
  const Hd hd = to_hyper(c.h);
  Dataset<long double> dl{dd.X.cast<long double>(), dd.y.cast<long double>()};
  GpHyperparams<long double> hl{hd.sigma_f, hd.lengthscales.cast<long double>(), hd.sigma_w};
  const auto gd = fit(dd, hd);
  const auto gl = fit(dl, hl);
  const Eigen::Vector3d x(0.3, 0.6, 0.9);
  EXPECT_NEAR(predict(gd, x).mean, static_cast<double>(predict(gl, x.cast<long double>()).mean), 1e-9);
  EXPECT_NEAR(nlml(gd), static_cast<double>(nlml(gl)), 1e-9);
}

TEST(Gpr, RejectsBadInput) {
  Dataset<double> d;
  d.X = Eigen::MatrixXd::Zero(2, 2);
  d.y = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(fit(d, iso(1.0, 1.0, 1e-3, 2)), InvalidArgument);
  d.y = Eigen::VectorXd::Zero(2);
  EXPECT_THROW(fit(d, iso(1.0, 1.0, 1e-3, 3)), InvalidArgument);
  EXPECT_THROW(fit(d, iso(-1.0, 1.0, 1e-3, 2)), InvalidArgument);
  EXPECT_THROW(fit(d, iso(1.0, 1.0, 1e-9, 2)), InvalidArgument);
}
