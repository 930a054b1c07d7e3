#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include "pagkit/model.hpp"

namespace pagkit {

// Synchronous-reference-frame PLL with PI loop filter.
struct PllParams {
  double zeta = 1.0 / std::numbers::sqrt2;
  double omega_c = 2.0 * std::numbers::pi * 10.0;  // rad/s

  double k_p() const { return 2.0 * zeta * omega_c; }
  double k_i() const { return omega_c * omega_c; }
  void validate() const;
};

// Output-Lurie error dynamics
//   x' = [-k_p 1; -k_i 0] x + [k_p 0; k_i 0] u + [k_p; k_i] f(y, u),  y = x_1,
// with the registered nonlinearity "pll".
NonlinearSystem pll_system(const PllParams& params = {}, double m_f = 0.0,
                           double u_max = std::numeric_limits<double>::infinity());

struct MfOptions {
  int grid = 65;         // points per scalar dimension, at least 33
  double margin = 1.05;
};

// Constant of the quadratic remainder bound of f on |y|, |y_bar| <= y_max and
// |u|, |u_bar| <= u_max. The remainder is
//   R = R0(y, y_bar) + du . w1(y, y_bar) + u_bar . w2(y, y_bar),
// so |R| <= |R0| + r |w1| + u_max |w2| with r = |du| <= 2 u_max. That ratio
// to (y - y_bar)^2 + r^2 is maximised exactly in r and on a grid in
// (y, y_bar); the grid maximum is multiplied by the margin.
double estimate_Mf(const PllParams& params, double y_max, double u_max,
                   const MfOptions& options = {});

}  // namespace pagkit
