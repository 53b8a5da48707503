#ifndef SERVOTUNE_POLYNOMIAL_HPP
#define SERVOTUNE_POLYNOMIAL_HPP

// Real-coefficient polynomials and rational transfer functions in the
// Laplace variable. Coefficients are stored in descending powers of s,
// i.e. c(0)*s^n + c(1)*s^(n-1) + ... + c(n).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>

#include "servotune/errors.hpp"

namespace servotune {

template <typename Scalar>
using Poly = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Drops leading (highest-power) coefficients that are exactly zero.
/// The zero polynomial is returned as a single 0 coefficient.
template <typename Scalar>
Poly<Scalar> poly_trim(const Poly<Scalar>& p) {
  Eigen::Index first = 0;
  while (first + 1 < p.size() && p(first) == Scalar(0)) ++first;
  if (p.size() == 0) return Poly<Scalar>::Zero(1);
  return p.tail(p.size() - first);
}

template <typename Scalar>
Eigen::Index poly_degree(const Poly<Scalar>& p) {
  return poly_trim(p).size() - 1;
}

template <typename Scalar>
bool poly_is_zero(const Poly<Scalar>& p) {
  return (p.array() == Scalar(0)).all();
}

template <typename Scalar>
Poly<Scalar> poly_add(const Poly<Scalar>& a, const Poly<Scalar>& b) {
  const Eigen::Index n = std::max(a.size(), b.size());
  Poly<Scalar> r = Poly<Scalar>::Zero(n);
  r.tail(a.size()) += a;
  r.tail(b.size()) += b;
  return poly_trim(r);
}

template <typename Scalar>
Poly<Scalar> poly_mul(const Poly<Scalar>& a, const Poly<Scalar>& b) {
  Poly<Scalar> r = Poly<Scalar>::Zero(a.size() + b.size() - 1);
  for (Eigen::Index i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < b.size(); ++j) r(i + j) += a(i) * b(j);
  return poly_trim(r);
}

template <typename Scalar>
Poly<Scalar> poly_scale(const Poly<Scalar>& a, Scalar k) {
  return poly_trim<Scalar>(a * k);
}

/// Horner evaluation at a complex point.
template <typename Scalar>
std::complex<Scalar> poly_eval(const Poly<Scalar>& p, std::complex<Scalar> s) {
  std::complex<Scalar> acc(0);
  for (Eigen::Index i = 0; i < p.size(); ++i) acc = acc * s + p(i);
  return acc;
}

/// Long division a = q*b + r. Returns {q, r}.
template <typename Scalar>
std::pair<Poly<Scalar>, Poly<Scalar>> poly_divmod(const Poly<Scalar>& a,
                                                  const Poly<Scalar>& b) {
  const Poly<Scalar> num = poly_trim(a);
  const Poly<Scalar> den = poly_trim(b);
  if (poly_is_zero(den)) throw ModelError("polynomial division by zero");
  const Eigen::Index n = num.size() - 1;
  const Eigen::Index m = den.size() - 1;
  if (n < m) return {Poly<Scalar>::Zero(1), num};
  Poly<Scalar> rem = num;
  Poly<Scalar> quo = Poly<Scalar>::Zero(n - m + 1);
  for (Eigen::Index k = 0; k <= n - m; ++k) {
    const Scalar c = rem(k) / den(0);
    quo(k) = c;
    rem.segment(k, m + 1) -= c * den;
    rem(k) = Scalar(0);
  }
  return {quo, poly_trim<Scalar>(rem.tail(std::max<Eigen::Index>(m, 1)))};
}

/// Roots via the companion-matrix eigenvalues.
template <typename Scalar>
Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> poly_roots(
    const Poly<Scalar>& p) {
  const Poly<Scalar> q = poly_trim(p);
  const Eigen::Index n = q.size() - 1;
  if (n < 1) return {};
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> comp =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
  comp.row(0) = -q.tail(n).transpose() / q(0);
  if (n > 1) comp.bottomLeftCorner(n - 1, n - 1).setIdentity();
  return Eigen::EigenSolver<decltype(comp)>(comp, false).eigenvalues();
}

/// Rational function num(s)/den(s).
template <typename Scalar>
struct TransferFunction {
  Poly<Scalar> num;
  Poly<Scalar> den;

  TransferFunction() : num(Poly<Scalar>::Zero(1)), den(Poly<Scalar>::Ones(1)) {}
  TransferFunction(Poly<Scalar> n, Poly<Scalar> d)
      : num(poly_trim(n)), den(poly_trim(d)) {
    if (poly_is_zero(den))
      throw ModelError("transfer function denominator is identically zero");
  }

  static TransferFunction constant(Scalar k) {
    return {Poly<Scalar>::Constant(1, k), Poly<Scalar>::Ones(1)};
  }

  Eigen::Index num_degree() const { return poly_degree(num); }
  Eigen::Index den_degree() const { return poly_degree(den); }
  bool proper() const { return num_degree() <= den_degree(); }
  bool strictly_proper() const {
    return poly_is_zero(num) || num_degree() < den_degree();
  }

  std::complex<Scalar> operator()(std::complex<Scalar> s) const {
    return poly_eval(num, s) / poly_eval(den, s);
  }
  std::complex<Scalar> freq_response(Scalar omega) const {
    return (*this)(std::complex<Scalar>(0, omega));
  }
  Scalar dc_gain() const { return num(num.size() - 1) / den(den.size() - 1); }

  /// Same function with the denominator scaled monic.
  TransferFunction monic() const {
    const Scalar lead = den(0);
    return {num / lead, den / lead};
  }

  auto poles() const { return poly_roots(den); }
  auto zeros() const { return poly_roots(num); }
};

template <typename Scalar>
TransferFunction<Scalar> operator*(const TransferFunction<Scalar>& a,
                                   const TransferFunction<Scalar>& b) {
  return {poly_mul(a.num, b.num), poly_mul(a.den, b.den)};
}

template <typename Scalar>
TransferFunction<Scalar> reciprocal(const TransferFunction<Scalar>& tf) {
  return {tf.den, tf.num};
}

/// Divides numerator and denominator by a common factor. Throws if either
/// division leaves a remainder larger than `tol` relative to the dividend.
template <typename Scalar>
TransferFunction<Scalar> cancel_factor(const TransferFunction<Scalar>& tf,
                                       const Poly<Scalar>& factor,
                                       Scalar tol = Scalar(1e-9)) {
  auto [qn, rn] = poly_divmod(tf.num, factor);
  auto [qd, rd] = poly_divmod(tf.den, factor);
  const Scalar sn = tf.num.cwiseAbs().maxCoeff();
  const Scalar sd = tf.den.cwiseAbs().maxCoeff();
  if (rn.cwiseAbs().maxCoeff() > tol * sn || rd.cwiseAbs().maxCoeff() > tol * sd)
    throw ModelError("factor does not divide the transfer function");
  return {qn, qd};
}

}  // namespace servotune

#endif  // SERVOTUNE_POLYNOMIAL_HPP
