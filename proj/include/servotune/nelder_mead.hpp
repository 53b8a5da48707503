#ifndef SERVOTUNE_NELDER_MEAD_HPP
#define SERVOTUNE_NELDER_MEAD_HPP

// Derivative-free simplex minimization inside a box.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace servotune {

template <typename Scalar>
struct NelderMeadOptions {
  int max_evaluations = 400;
  Scalar f_tolerance = Scalar(1e-10);
  Scalar x_tolerance = Scalar(1e-8);
  Scalar initial_step = Scalar(0.5);
};

template <typename Scalar>
struct NelderMeadResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
  Scalar f = std::numeric_limits<Scalar>::infinity();
  int evaluations = 0;
};

/// Minimizes f over the box [lo, hi], starting from x0. Trial points are
/// projected onto the box; non-finite values count as +inf.
template <typename Scalar, typename F>
NelderMeadResult<Scalar> nelder_mead(F&& f, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x0,
                                     const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& lo,
                                     const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& hi,
                                     const NelderMeadOptions<Scalar>& opt = {}) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = x0.size();
  NelderMeadResult<Scalar> res;

  auto eval = [&](const Vec& x) {
    ++res.evaluations;
    const Scalar v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<Scalar>::infinity();
  };
  auto project = [&](const Vec& x) -> Vec { return x.cwiseMax(lo).cwiseMin(hi); };

  std::vector<Vec> s(static_cast<size_t>(n + 1));
  std::vector<Scalar> fs(static_cast<size_t>(n + 1));
  s[0] = project(x0);
  fs[0] = eval(s[0]);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec x = s[0];
    const Scalar step = opt.initial_step * (hi(i) - lo(i) > 0 ? Scalar(1) : Scalar(0));
    x(i) = (x(i) + step <= hi(i)) ? x(i) + step : x(i) - step;
    s[static_cast<size_t>(i + 1)] = project(x);
    fs[static_cast<size_t>(i + 1)] = eval(s[static_cast<size_t>(i + 1)]);
  }

  std::vector<size_t> order(s.size());
  while (res.evaluations < opt.max_evaluations) {
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return fs[a] < fs[b]; });
    const size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];

    Scalar spread = 0;
    for (const Vec& v : s) spread = std::max(spread, (v - s[best]).cwiseAbs().maxCoeff());
    if (std::isfinite(fs[worst]) && fs[worst] - fs[best] <= opt.f_tolerance) break;
    if (spread <= opt.x_tolerance) break;

    Vec centroid = Vec::Zero(n);
    for (size_t i = 0; i < s.size(); ++i)
      if (i != worst) centroid += s[i];
    centroid /= static_cast<Scalar>(n);

    const Vec xr = project(centroid + (centroid - s[worst]));
    const Scalar fr = eval(xr);
    if (fr < fs[best]) {
      const Vec xe = project(centroid + Scalar(2) * (centroid - s[worst]));
      const Scalar fe = eval(xe);
      if (fe < fr) {
        s[worst] = xe;
        fs[worst] = fe;
      } else {
        s[worst] = xr;
        fs[worst] = fr;
      }
      continue;
    }
    if (fr < fs[second]) {
      s[worst] = xr;
      fs[worst] = fr;
      continue;
    }
    const bool outside = fr < fs[worst];
    const Vec xc = outside ? Vec(centroid + Scalar(0.5) * (xr - centroid))
                           : Vec(centroid + Scalar(0.5) * (s[worst] - centroid));
    const Scalar fc = eval(xc);
    if (fc < std::min(fr, fs[worst])) {
      s[worst] = xc;
      fs[worst] = fc;
      continue;
    }
    for (size_t i = 0; i < s.size(); ++i) {
      if (i == best) continue;
      s[i] = s[best] + Scalar(0.5) * (s[i] - s[best]);
      fs[i] = eval(s[i]);
    }
  }

  const auto it = std::min_element(fs.begin(), fs.end());
  res.x = s[static_cast<size_t>(it - fs.begin())];
  res.f = *it;
  return res;
}

}  // namespace servotune

#endif  // SERVOTUNE_NELDER_MEAD_HPP
