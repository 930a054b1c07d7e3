#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pagkit/linops.hpp"
#include "pagkit/nonlinearity.hpp"
#include "pagkit/pll.hpp"

using namespace pagkit;

namespace {

double f_pll(double y, double u0, double u1) {
  return y - std::sin(y) + u0 * (std::cos(y) - 1.0) + u1 * std::sin(y);
}

// Remainder of the first-order expansion of f about (y_bar, u_bar), both
// partial derivatives written out by hand.
double remainder(double y, double u0, double u1, double yb, double ub0, double ub1) {
  const double dfdy = 1.0 - std::cos(yb) - ub0 * std::sin(yb) + ub1 * std::cos(yb);
  const double dfdu0 = std::cos(yb) - 1.0;
  const double dfdu1 = std::sin(yb);
  return f_pll(y, u0, u1) - f_pll(yb, ub0, ub1) - dfdy * (y - yb) - dfdu0 * (u0 - ub0) -
         dfdu1 * (u1 - ub1);
}

}  // namespace

TEST_CASE("pll_system matrices and nonlinearity") {
  const PllParams p;
  CHECK(p.k_p() == doctest::Approx(2.0 * p.zeta * p.omega_c));
  CHECK(p.k_i() == doctest::Approx(p.omega_c * p.omega_c));
  const auto sys = pll_system(p);
  CHECK(sys.structure == Structure::kOutputLurie);
  CHECK(sys.nonlinearity.name == "pll");
  CHECK(sys.linear.A(0, 0) == -p.k_p());
  CHECK(sys.linear.A(1, 0) == -p.k_i());
  CHECK(sys.linear.A(0, 1) == 1.0);
  CHECK(sys.linear.B(0, 0) == p.k_p());
  CHECK(sys.linear.B(1, 1) == 0.0);
  CHECK(sys.linear.F(1, 0) == p.k_i());

  Vector x = Vector::Zero(2), u = Vector::Zero(2);
  CHECK(sys.eval_f(x, u)(0) == 0.0);
  CHECK(sys.jacobian_fx(x, u).isZero(0.0));
  x(0) = 0.1;
  CHECK(sys.eval_f(x, u)(0) == doctest::Approx(1.6658e-4).epsilon(1e-4));
  CHECK(sys.eval_f(x, u)(0) == doctest::Approx(0.1 - std::sin(0.1)).epsilon(1e-14));

  // df/du at the origin by central differences.
  const auto& def = lookup_nonlinearity("pll");
  Vector y0 = Vector::Zero(1), out(1);
  for (int i = 0; i < 2; ++i) {
    Vector up = Vector::Zero(2), dn = Vector::Zero(2);
    up(i) = 1e-6;
    dn(i) = -1e-6;
    def.eval({}, y0, up, out);
    const double hi = out(0);
    def.eval({}, y0, dn, out);
    CHECK(std::abs(hi - out(0)) / 2e-6 < 1e-12);
  }

  const auto es = Eigen::EigenSolver<Matrix>(sys.linear.A).eigenvalues();
  for (Eigen::Index i = 0; i < 2; ++i) {
    CHECK(es(i).real() == doctest::Approx(-p.zeta * p.omega_c).epsilon(1e-12));
    CHECK(std::abs(es(i).imag()) ==
          doctest::Approx(p.omega_c * std::sqrt(1.0 - p.zeta * p.zeta)).epsilon(1e-12));
  }
  CHECK(is_hurwitz(sys.linear.A).spectral_abscissa == doctest::Approx(-44.43).epsilon(1e-4));

  PllParams bad;
  bad.zeta = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("estimate_Mf without input reduces to sin(y_max) / 2") {
  CHECK(estimate_Mf(PllParams{}, 0.14, 0.0) ==
        doctest::Approx(1.05 * 0.5 * std::sin(0.14)).epsilon(1e-3));
  CHECK(estimate_Mf(PllParams{}, 0.14, 0.0) == doctest::Approx(1.05 * 0.0698).epsilon(1e-2));
  const double tiny = 1e-3;
  CHECK(estimate_Mf(PllParams{}, tiny, 0.0) == doctest::Approx(1.05 * tiny / 2.0).epsilon(1e-3));
}

TEST_CASE("estimate_Mf converges under grid refinement") {
  for (double level : {0.0, 0.02, 0.06, 0.1}) {
    const double y_max = 0.03 + level;
    const double coarse = estimate_Mf(PllParams{}, y_max, level, MfOptions{33, 1.05});
    const double fine = estimate_Mf(PllParams{}, y_max, level, MfOptions{65, 1.05});
    CHECK(std::abs(fine - coarse) < 0.01 * fine);
  }
  CHECK_THROWS_AS(estimate_Mf(PllParams{}, 0.1, 0.1, MfOptions{16, 1.05}), Error);
}

TEST_CASE("estimated M_f bounds the remainder on random points") {
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (double level : {0.02, 0.06, 0.1}) {
    const double y_max = 0.14;
    const double mf = estimate_Mf(PllParams{}, y_max, level);
    int violations = 0;
    for (int i = 0; i < 10000; ++i) {
      const double y = y_max * unit(rng), yb = y_max * unit(rng);
      // Uniform in the disc of radius u_max.
      double u0, u1, ub0, ub1;
      do {
        u0 = unit(rng);
        u1 = unit(rng);
      } while (u0 * u0 + u1 * u1 > 1.0);
      do {
        ub0 = unit(rng);
        ub1 = unit(rng);
      } while (ub0 * ub0 + ub1 * ub1 > 1.0);
      u0 *= level;
      u1 *= level;
      ub0 *= level;
      ub1 *= level;
      const double r = std::abs(remainder(y, u0, u1, yb, ub0, ub1));
      const double d2 = (y - yb) * (y - yb) + (u0 - ub0) * (u0 - ub0) + (u1 - ub1) * (u1 - ub1);
      if (r > mf * d2) ++violations;
    }
    CHECK(violations == 0);
  }
}
