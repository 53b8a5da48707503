#ifndef SERVOTUNE_GPR_HPP
#define SERVOTUNE_GPR_HPP

// Gaussian-process regression with a squared-exponential ARD kernel,
// zero prior mean, exact posterior and marginal-likelihood fitting.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "servotune/errors.hpp"
#include "servotune/nelder_mead.hpp"

namespace servotune {

template <typename Scalar>
using GpVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using GpMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
inline constexpr Scalar kNoiseFloor = Scalar(1e-8);

/// sigma_f: signal scale; lengthscales: l_i with L = diag(l_i^2);
/// sigma_w: observation noise standard deviation.
template <typename Scalar>
struct GpHyperparams {
  Scalar sigma_f = Scalar(1);
  GpVector<Scalar> lengthscales;
  Scalar sigma_w = kNoiseFloor<Scalar>;

  Eigen::Index dims() const { return lengthscales.size(); }

  void validate() const {
    if (!(sigma_f > 0)) throw InvalidArgument("sigma_f must be positive");
    if (lengthscales.size() == 0 || !(lengthscales.array() > 0).all())
      throw InvalidArgument("lengthscales must be positive");
    if (!(sigma_w >= kNoiseFloor<Scalar>)) throw InvalidArgument("sigma_w below the noise floor");
  }
};

/// Inputs one per row.
template <typename Scalar>
struct Dataset {
  GpMatrix<Scalar> X;
  GpVector<Scalar> y;

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index dims() const { return X.cols(); }

  void validate() const {
    if (X.rows() != y.size()) throw InvalidArgument("input and target counts differ");
    if (!X.allFinite() || !y.allFinite()) throw InvalidArgument("dataset holds non-finite entries");
  }
};

template <typename Scalar, typename A, typename B>
Scalar kernel(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& xp,
              const GpHyperparams<Scalar>& h) {
  if (x.size() != xp.size() || x.size() != h.dims())
    throw InvalidArgument("kernel dimension mismatch");
  const Scalar r2 = ((x.reshaped() - xp.reshaped()).array() / h.lengthscales.array()).square().sum();
  return h.sigma_f * h.sigma_f * std::exp(Scalar(-0.5) * r2);
}

/// Gram matrix K(A, B), rows of A against rows of B.
template <typename Scalar>
GpMatrix<Scalar> gram(const GpMatrix<Scalar>& A, const GpMatrix<Scalar>& B,
                      const GpHyperparams<Scalar>& h) {
  if (A.cols() != h.dims() || B.cols() != h.dims()) throw InvalidArgument("kernel dimension mismatch");
  GpMatrix<Scalar> K(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < B.rows(); ++j) K(i, j) = kernel(A.row(i), B.row(j), h);
  return K;
}

template <typename Scalar>
struct GpPosterior {
  Dataset<Scalar> data;
  GpHyperparams<Scalar> hyper;
  GpMatrix<Scalar> factor;  // lower Cholesky factor of K + (sigma_w^2 + jitter) I
  GpVector<Scalar> alpha;
  Scalar jitter = 0;        // extra diagonal that was needed, 0 if none
};

template <typename Scalar>
struct Prediction {
  Scalar mean = 0;
  Scalar var = 0;
};

template <typename Scalar>
GpPosterior<Scalar> fit(const Dataset<Scalar>& data, const GpHyperparams<Scalar>& h) {
  data.validate();
  h.validate();
  if (data.size() < 1) throw InvalidArgument("fit needs at least one observation");
  if (data.dims() != h.dims()) throw InvalidArgument("dataset and hyperparameter dimensions differ");

  GpPosterior<Scalar> g{data, h, {}, {}, 0};
  GpMatrix<Scalar> K = gram(data.X, data.X, h);
  K.diagonal().array() += h.sigma_w * h.sigma_w;
  const Scalar scale = h.sigma_f * h.sigma_f;
  Scalar jitter = 0;
  for (;;) {
    GpMatrix<Scalar> Kj = K;
    Kj.diagonal().array() += jitter;
    Eigen::LLT<GpMatrix<Scalar>> llt(Kj);
    if (llt.info() == Eigen::Success) {
      g.factor = llt.matrixL();
      g.alpha = llt.solve(data.y);
      g.jitter = jitter;
      return g;
    }
    jitter = jitter == 0 ? Scalar(1e-10) * scale : jitter * 10;
    if (jitter > Scalar(1e-4) * scale * Scalar(1.0000001))
      throw FitError("Gram matrix is not positive definite after maximum jitter");
  }
}

template <typename Scalar, typename Derived>
Prediction<Scalar> predict(const GpPosterior<Scalar>& g, const Eigen::MatrixBase<Derived>& x) {
  const Eigen::Index m = g.data.size();
  if (x.size() != g.hyper.dims()) throw InvalidArgument("query dimension mismatch");
  GpVector<Scalar> k(m);
  for (Eigen::Index i = 0; i < m; ++i) k(i) = kernel(g.data.X.row(i), x.transpose(), g.hyper);
  Prediction<Scalar> p;
  p.mean = k.dot(g.alpha);
  const GpVector<Scalar> v = g.factor.template triangularView<Eigen::Lower>().solve(k);
  p.var = std::max(Scalar(0), g.hyper.sigma_f * g.hyper.sigma_f - v.squaredNorm());
  return p;
}

/// One prediction per row of Q; identical to calling predict row by row.
template <typename Scalar>
std::vector<Prediction<Scalar>> predict(const GpPosterior<Scalar>& g, const GpMatrix<Scalar>& Q) {
  std::vector<Prediction<Scalar>> out;
  out.reserve(static_cast<size_t>(Q.rows()));
  for (Eigen::Index i = 0; i < Q.rows(); ++i) out.push_back(predict(g, Q.row(i).transpose()));
  return out;
}

template <typename Scalar>
Scalar nlml(const GpPosterior<Scalar>& g) {
  const auto m = static_cast<Scalar>(g.data.size());
  return Scalar(0.5) * g.data.y.dot(g.alpha) + g.factor.diagonal().array().log().sum() +
         Scalar(0.5) * m * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
}

template <typename Scalar>
Scalar nlml(const Dataset<Scalar>& data, const GpHyperparams<Scalar>& h) {
  return nlml(fit(data, h));
}

/// Box for the hyperparameter search (natural units, applied per axis).
template <typename Scalar>
struct HyperBounds {
  Scalar sigma_f_min = Scalar(1e-3), sigma_f_max = Scalar(1e2);
  Scalar lengthscale_min = Scalar(1e-2), lengthscale_max = Scalar(1e1);
  Scalar sigma_w_min = kNoiseFloor<Scalar>, sigma_w_max = Scalar(1);
};

template <typename Scalar>
struct HyperFitOptions {
  int starts = 8;
  NelderMeadOptions<Scalar> local{};
};

namespace detail {

inline double halton(long index, int base) {
  double f = 1.0, r = 0.0;
  for (long i = index; i > 0; i /= base) {
    f /= base;
    r += f * static_cast<double>(i % base);
  }
  return r;
}

inline int nth_prime(int n) {
  static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  return primes[n % 16];
}

}  // namespace detail

/// Multi-start Nelder-Mead on the NLML in log-parameter space. The first
/// start is `init` (clamped to the box), the rest are Halton points of the
/// box. The result never has a larger NLML than `init`.
template <typename Scalar>
GpHyperparams<Scalar> fit_hyperparams(const Dataset<Scalar>& data, const GpHyperparams<Scalar>& init,
                                      const HyperBounds<Scalar>& bounds = {},
                                      const HyperFitOptions<Scalar>& opt = {}) {
  using Vec = GpVector<Scalar>;
  data.validate();
  if (data.size() < 3) throw InvalidArgument("hyperparameter fit needs at least three observations");
  const Eigen::Index d = data.dims();
  if (init.dims() != d) throw InvalidArgument("dataset and hyperparameter dimensions differ");

  Vec lo(d + 2), hi(d + 2);
  lo(0) = std::log(bounds.sigma_f_min);
  hi(0) = std::log(bounds.sigma_f_max);
  lo.segment(1, d).setConstant(std::log(bounds.lengthscale_min));
  hi.segment(1, d).setConstant(std::log(bounds.lengthscale_max));
  lo(d + 1) = std::log(std::max(bounds.sigma_w_min, kNoiseFloor<Scalar>));
  hi(d + 1) = std::log(bounds.sigma_w_max);

  auto unpack = [d](const Vec& z) {
    GpHyperparams<Scalar> h;
    h.sigma_f = std::exp(z(0));
    h.lengthscales = z.segment(1, d).array().exp();
    h.sigma_w = std::max(std::exp(z(d + 1)), kNoiseFloor<Scalar>);
    return h;
  };
  auto objective = [&](const Vec& z) {
    try {
      return nlml(data, unpack(z));
    } catch (const FitError&) {
      return std::numeric_limits<Scalar>::infinity();
    }
  };

  GpHyperparams<Scalar> best = init;
  Scalar best_f = std::numeric_limits<Scalar>::infinity();
  try {
    best_f = nlml(data, init);
  } catch (const FitError&) {
  }

  Vec z0(d + 2);
  z0(0) = std::log(init.sigma_f);
  z0.segment(1, d) = init.lengthscales.array().log();
  z0(d + 1) = std::log(std::max(init.sigma_w, kNoiseFloor<Scalar>));

  for (int s = 0; s < opt.starts; ++s) {
    Vec start = z0;
    if (s > 0)
      for (Eigen::Index i = 0; i < d + 2; ++i)
        start(i) = lo(i) + (hi(i) - lo(i)) *
                               static_cast<Scalar>(detail::halton(s, detail::nth_prime(static_cast<int>(i))));
    const auto r = nelder_mead<Scalar>(objective, start, lo, hi, opt.local);
    if (r.f < best_f) {
      best_f = r.f;
      best = unpack(r.x);
    }
  }
  if (!std::isfinite(best_f)) throw FitError("hyperparameter fit failed from every start");
  return best;
}

}  // namespace servotune

#endif  // SERVOTUNE_GPR_HPP
