#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>

#include "pagkit/linops.hpp"
#include "pagkit/median.hpp"
#include "pagkit/model.hpp"

namespace pagkit {

struct GainOptions {
  Eigen::Index grid_n = 4096;  // samples per period
  MedianOptions median;
  std::uint64_t seed = 0;      // multistart randomness for p >= 3
  int angle_seeds = 64;        // p = 2 coarse scan
  int multistarts = 128;       // p >= 3
};

// kLowerEstimate: the sup over output directions was not certified (p >= 3,
// or an inner median failed to converge); the value is still attained by
// some direction and therefore a valid lower estimate of the exact gain.
enum class SupQuality { kExact, kLowerEstimate };

// Diagonal linear PAG at one period: rho_T(y) <= diag(gamma_dc, gamma_ac) rho_T(u).
struct LinearPag {
  double gamma_dc = 0.0;
  double gamma_ac = 0.0;
  double period = 0.0;
  SupQuality quality = SupQuality::kExact;

  std::array<double, 2> apply(const RhoVector& rho) const {
    return {gamma_dc * rho.dc, gamma_ac * rho.ac};
  }
};

// Slope of the exact classical asymptotic gain: integral of ||H(t)|| over [0, inf).
double classical_ag_slope(const StateSpace& sys, InputChannel channel);

// Exact linear PAG. gamma_ac = T sup_{|v|=1} D_median(v . H_T), with all
// period integrals taken on the N + 1 points closed at H_T(T^-) (Simpson for even N,
// trapezoid for odd N). Accuracy is set by T / N against the fastest mode.
LinearPag linear_pag(const StateSpace& sys, InputChannel channel, double period,
                     const GainOptions& options = {});

// Conservative AC gain: integral of ||H_T(t)|| over one period.
double linear_pag_conservative(const StateSpace& sys, InputChannel channel, double period,
                               Eigen::Index grid_n = 4096);

// T * D_median of the direction-projected periodic impulse response.
double projected_ac_gain(const ImpulseGrid& h_t, const Vector& direction,
                         const MedianOptions& median, bool* converged = nullptr);

struct SubsystemPags {
  LinearPag u_to_x;
  LinearPag f_to_x;
  LinearPag u_to_y;
  LinearPag f_to_y;
};

SubsystemPags subsystem_pags(const StateSpace& sys, double period,
                             const GainOptions& options = {});

// Only the two output channels (all that the output-Lurie bound needs).
SubsystemPags output_pags(const StateSpace& sys, double period, const GainOptions& options = {});

enum class Branch { kRoot, kSaturated };

struct QuadResolution {
  double xi = 0.0;
  Branch branch = Branch::kRoot;
};

// Largest xi in [0, cap] with a xi^2 - xi + c >= 0: cap itself when
// a cap^2 + c > cap (Saturated), otherwise the smaller root (Root).
// Throws kInvalidArgument unless a >= 0, c >= 0, cap > 0.
QuadResolution quad_resolve(double a, double c, double cap);

struct NonlinearPagResult {
  double eta_dc = 0.0;
  double eta_ac = 0.0;
  std::optional<double> xi_dc;  // state-level bounds (general structure only)
  std::optional<double> xi_ac;
  Branch branch_dc = Branch::kRoot;
  Branch branch_ac = Branch::kRoot;
  double b = 0.0;

  std::array<double, 2> value() const { return {eta_dc, eta_ac}; }
};

// Conservative PAG of  x' = Ax + Bu + F f(x,u),  y = Cx + g(x).
// b bounds |x| over the invariant set for inputs with |rho_T(u)|_1.
NonlinearPagResult nonlinear_pag_general(const NonlinearSystem& nsys, double period, double b,
                                         const RhoVector& rho_u, const GainOptions& options = {});
NonlinearPagResult nonlinear_pag_general(const NonlinearSystem& nsys, const SubsystemPags& pags,
                                         double b, const RhoVector& rho_u);

// Conservative PAG for the output-Lurie structure; b bounds |Cx| over the
// invariant set (the classical AG at |rho_T(u)|_1).
NonlinearPagResult nonlinear_pag_special(const NonlinearSystem& nsys, double period, double b,
                                         const RhoVector& rho_u, const GainOptions& options = {});
NonlinearPagResult nonlinear_pag_special(const NonlinearSystem& nsys, const SubsystemPags& pags,
                                         double b, const RhoVector& rho_u);

enum class Composition { kPureAc, kSplit, kPureDc };

// (0, l), (l/2, l/2) or (l, 0).
RhoVector composition_rho(Composition composition, double level);

using PagFunction = std::function<std::array<double, 2>(const RhoVector&)>;

// (1/l) |gamma_T(rho)|_1 with rho fixed by the composition.
double mu_slope(const PagFunction& gamma, double level, Composition composition);
double mu_slope(const LinearPag& pag, double level, Composition composition);

enum class Verdict { kPagSharper, kAgSharper, kTie };

struct SharpnessReport {
  Verdict verdict = Verdict::kTie;
  double pag_bound = 0.0;  // |gamma_T(rho)|_1
  double ag_bound = 0.0;   // gamma(|rho|_1)
};

SharpnessReport sharpness_compare(const std::array<double, 2>& pag_value, double ag_value);

}  // namespace pagkit
