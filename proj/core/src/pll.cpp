#include "pagkit/pll.hpp"

#include <algorithm>

namespace pagkit {

void PllParams::validate() const {
  if (!(zeta > 0.0) || !(omega_c > 0.0) || !std::isfinite(zeta) || !std::isfinite(omega_c)) {
    throw Error(ErrorCode::kInvalidArgument, "PLL needs zeta > 0 and omega_c > 0");
  }
}

NonlinearSystem pll_system(const PllParams& params, double m_f, double u_max) {
  params.validate();
  const double kp = params.k_p();
  const double ki = params.k_i();
  Matrix a(2, 2);
  a << -kp, 1.0, -ki, 0.0;
  Matrix b(2, 2);
  b << kp, 0.0, ki, 0.0;
  Matrix c(1, 2);
  c << 1.0, 0.0;
  Matrix f(2, 1);
  f << kp, ki;
  return NonlinearSystem(StateSpace(a, b, c, f), Nonlinearity{"pll", {}}, m_f, 0.0,
                         Structure::kOutputLurie, u_max);
}

namespace {

// max over r in [0, r_max] of (a + b r) / (d + r^2), d > 0.
double best_over_r(double a, double b, double d, double r_max) {
  auto g = [&](double r) { return (a + b * r) / (d + r * r); };
  double best = std::max(g(0.0), g(r_max));
  if (b > 0.0) {
    const double r = (-a + std::sqrt(a * a + b * b * d)) / b;
    if (r > 0.0 && r < r_max) best = std::max(best, g(r));
  }
  return best;
}

}  // namespace

double estimate_Mf(const PllParams& params, double y_max, double u_max,
                   const MfOptions& options) {
  params.validate();
  if (!(y_max > 0.0) || !(u_max >= 0.0) || !std::isfinite(u_max)) {
    throw Error(ErrorCode::kInvalidArgument, "estimate_Mf needs y_max > 0 and finite u_max >= 0");
  }
  if (options.grid < 33 || !(options.margin >= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "estimate_Mf needs grid >= 33 and margin >= 1");
  }
  const int n = options.grid;
  const double spacing = 2.0 * y_max / (n - 1);
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = -y_max + spacing * i;
    for (int j = 0; j < n; ++j) {
      const double yb = -y_max + spacing * j;
      const double sb = std::sin(yb);
      const double cb = std::cos(yb);
      double ratio = 0.0;
      if (i == j) {
        // Limit y -> y_bar along r = c |y - y_bar|, maximised over c.
        const double c_max = u_max > 0.0 ? 1e300 : 0.0;
        ratio = best_over_r(0.5 * std::abs(sb) + 0.5 * u_max, 1.0, 1.0, c_max);
      } else {
        const double d = y - yb;
        const double sy = std::sin(y);
        const double cy = std::cos(y);
        const double r0 = std::abs(-sy + sb + cb * d);
        const double w1 = std::hypot(cy - cb, sy - sb);
        const double w2 = std::hypot(cy - cb + sb * d, sy - sb - cb * d);
        ratio = best_over_r(r0 + u_max * w2, w1, d * d, 2.0 * u_max);
      }
      best = std::max(best, ratio);
    }
  }
  return options.margin * best;
}

}  // namespace pagkit
