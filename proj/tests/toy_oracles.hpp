#ifndef SERVOTUNE_TESTS_TOY_ORACLES_HPP
#define SERVOTUNE_TESTS_TOY_ORACLES_HPP

#include "servotune/tuner.hpp"

namespace toy {

// 20 x 20 x 20 grid on [1, 20]^3 with unit spacing.
inline servotune::FeasibleSet cube20() {
  servotune::FeasibleSet s;
  s.axes = {servotune::GridAxis{1.0, 20.0, 20}, servotune::GridAxis{1.0, 20.0, 20},
            servotune::GridAxis{1.0, 20.0, 20}};
  return s;
}

// Anisotropic convex bowl with its minimum off the grid.
inline double bowl(const servotune::GainVector& g) {
  const double a = (g.Kp - 13.3) / 6.0, b = (g.Kv - 4.6) / 9.0, c = (g.Ki - 16.2) / 4.0;
  return 10.0 + a * a + b * b + c * c + 0.3 * a * b;
}

}  // namespace toy

#endif  // SERVOTUNE_TESTS_TOY_ORACLES_HPP
