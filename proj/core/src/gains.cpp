#include "pagkit/gains.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "pagkit/linops.hpp"
#include "pagkit/random.hpp"

namespace pagkit {
namespace {

// 5-point Gauss-Legendre rule mapped to [0, 1].
constexpr std::array<double, 5> kGlNodes = {
    0.5 - 0.5 * 0.9061798459386640, 0.5 - 0.5 * 0.5384693101056831, 0.5,
    0.5 + 0.5 * 0.5384693101056831, 0.5 + 0.5 * 0.9061798459386640};
constexpr std::array<double, 5> kGlWeights = {
    0.5 * 0.2369268850561891, 0.5 * 0.4786286704993665, 0.5 * 0.5688888888888889,
    0.5 * 0.4786286704993665, 0.5 * 0.2369268850561891};

// Tail of the improper integral must fall below this fraction of the total.
constexpr double kTailFraction = 1e-9;

double max_abs_eigenvalue(const Matrix& a) {
  Eigen::EigenSolver<Matrix> solver(a, false);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::kEigFail, "eigenvalue solver failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

// Integral of |y_row * e^{A tau} b| over [lo, hi] for the SISO kink panels,
// evaluating the exponential directly at each node.
double gl_direct(const Matrix& y_row, const Matrix& a, const Matrix& b, double lo, double hi) {
  const double width = hi - lo;
  if (width <= 0.0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
    const double tau = lo + kGlNodes[i] * width;
    sum += kGlWeights[i] * std::abs((y_row * matrix_exponential(a * tau) * b)(0, 0));
  }
  return sum * width;
}

double siso_value(const Matrix& y_row, const Matrix& a, const Matrix& b, double tau) {
  return (y_row * matrix_exponential(a * tau) * b)(0, 0);
}

// Root of the SISO impulse response inside [lo, hi] given a sign change.
double bisect_root(const Matrix& y_row, const Matrix& a, const Matrix& b, double lo, double hi,
                   double f_lo) {
  for (int it = 0; it < 60 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = siso_value(y_row, a, b, mid);
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Composite Simpson on the N + 1 period points when N is even, trapezoid
// otherwise. Positive weights summing to T either way.
Vector period_weights(const ImpulseGrid& grid) {
  const auto n = grid.size();
  Vector w = Vector::Constant(n + 1, grid.step);
  if (n % 2 == 0) {
    for (Eigen::Index k = 1; k < n; ++k) w(k) *= (k % 2 ? 4.0 : 2.0) / 3.0;
    w(0) /= 3.0;
    w(n) /= 3.0;
  } else {
    w(0) *= 0.5;
    w(n) *= 0.5;
  }
  return w;
}

// Rows: v^T H_T(t_k) for k = 0..N (the last row is the closing sample).
Matrix project_rows(const ImpulseGrid& grid, const Vector& v) {
  const auto n = grid.size();
  const auto m = grid.closing.cols();
  Matrix rows(n + 1, m);
  for (Eigen::Index k = 0; k < n; ++k) {
    rows.row(k).noalias() = v.transpose() * grid.samples[static_cast<std::size_t>(k)];
  }
  rows.row(n).noalias() = v.transpose() * grid.closing;
  return rows;
}

struct SupResult {
  double value = 0.0;
  bool certified = true;
};

SupResult sup_over_angle(const ImpulseGrid& grid, const GainOptions& options) {
  bool all_converged = true;
  auto objective = [&](double theta) {
    Vector v(2);
    v << std::cos(theta), std::sin(theta);
    bool ok = true;
    const double value = projected_ac_gain(grid, v, options.median, &ok);
    all_converged = all_converged && ok;
    return value;
  };
  const int seeds = std::max(4, options.angle_seeds);
  const double spacing = std::numbers::pi / seeds;
  int best_j = 0;
  double best = -1.0;
  for (int j = 0; j < seeds; ++j) {
    const double value = objective(spacing * j);
    if (value > best) {
      best = value;
      best_j = j;
    }
  }
  // Golden-section refinement inside the bracketing cell pair.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = spacing * (best_j - 1);
  double hi = spacing * (best_j + 1);
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = objective(x1);
  double f2 = objective(x2);
  while (hi - lo > 1e-9) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = objective(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = objective(x1);
    }
  }
  best = std::max({best, f1, f2});
  return SupResult{best, all_converged};
}

SupResult sup_multistart(const ImpulseGrid& grid, Eigen::Index p, double period,
                         const GainOptions& options) {
  std::mt19937_64 rng(derive_seed(options.seed, {seed_key(period), static_cast<std::uint64_t>(p)}));
  auto objective = [&](const Vector& v) {
    return projected_ac_gain(grid, v.normalized(), options.median, nullptr);
  };
  constexpr double kFdStep = 1e-6;
  constexpr double kRelTol = 1e-6;
  double best = 0.0;
  for (int start = 0; start < std::max(1, options.multistarts); ++start) {
    Vector v(p);
    for (Eigen::Index i = 0; i < p; ++i) v(i) = standard_normal(rng);
    if (v.norm() == 0.0) v(0) = 1.0;
    v.normalize();
    double f = objective(v);
    double step = 0.25;
    for (int it = 0; it < 200 && step > 1e-9; ++it) {
      Vector grad(p);
      for (Eigen::Index i = 0; i < p; ++i) {
        Vector plus = v;
        Vector minus = v;
        plus(i) += kFdStep;
        minus(i) -= kFdStep;
        grad(i) = (objective(plus) - objective(minus)) / (2.0 * kFdStep);
      }
      grad -= grad.dot(v) * v;  // tangent to the sphere
      if (grad.norm() <= kRelTol * std::max(f, 1e-300)) break;
      const Vector candidate = (v + step * grad.normalized()).normalized();
      const double f_candidate = objective(candidate);
      if (f_candidate > f) {
        const bool small_gain = f_candidate - f <= kRelTol * f;
        v = candidate;
        f = f_candidate;
        step *= 1.5;
        if (small_gain) break;
      } else {
        step *= 0.5;
      }
    }
    best = std::max(best, f);
  }
  return SupResult{best, false};
}

Matrix nonzero_columns(const Matrix& m) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (!m.col(j).isZero(0.0)) keep.push_back(j);
  }
  Matrix out(m.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(keep[i]);
  return out;
}

}  // namespace

double classical_ag_slope(const StateSpace& sys, InputChannel channel) {
  const double sigma = require_hurwitz(sys);
  // Zero columns of B and zero rows of C leave ||H(t)|| unchanged; dropping
  // them lets padded SISO channels use the kink-aware path.
  const Matrix b = nonzero_columns(sys.input_map(channel));
  const Matrix c_rows = nonzero_columns(sys.C.transpose()).transpose();
  if (b.cols() == 0 || c_rows.rows() == 0) return 0.0;
  const double lambda_max = max_abs_eigenvalue(sys.A);
  const double dt = 0.05 / lambda_max;
  const bool siso = c_rows.rows() == 1 && b.cols() == 1;

  const Matrix propagator = matrix_exponential(sys.A * dt);
  std::array<Matrix, 5> node_maps;
  for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
    node_maps[i] = matrix_exponential(sys.A * (kGlNodes[i] * dt)) * b;
  }

  Matrix y_row = c_rows;  // C e^{A t_k}
  double total = 0.0;
  double envelope = 0.0;  // max of |H(s)| e^{-sigma s} seen so far
  double t = 0.0;
  const double min_horizon = 10.0 / -sigma;
  const double max_horizon = 600.0 / -sigma;

  Matrix h_here = y_row * b;
  while (true) {
    std::array<Matrix, 5> h_nodes;
    for (std::size_t i = 0; i < kGlNodes.size(); ++i) h_nodes[i] = y_row * node_maps[i];
    Matrix y_next = y_row * propagator;
    Matrix h_next = y_next * b;

    bool kinked = false;
    if (siso) {
      double prev = h_here(0, 0);
      for (const auto& h : h_nodes) {
        kinked = kinked || (h(0, 0) < 0.0) != (prev < 0.0);
        prev = h(0, 0);
      }
      kinked = kinked || (h_next(0, 0) < 0.0) != (prev < 0.0);
    }

    double panel = 0.0;
    if (kinked) {
      // |h| has a corner at each zero crossing; split the panel there.
      std::vector<double> taus = {0.0};
      std::vector<double> values = {h_here(0, 0)};
      for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
        taus.push_back(kGlNodes[i] * dt);
        values.push_back(h_nodes[i](0, 0));
      }
      taus.push_back(dt);
      values.push_back(h_next(0, 0));
      std::vector<double> cuts = {0.0};
      for (std::size_t i = 1; i < taus.size(); ++i) {
        if ((values[i] < 0.0) != (values[i - 1] < 0.0)) {
          cuts.push_back(bisect_root(y_row, sys.A, b, taus[i - 1], taus[i], values[i - 1]));
        }
      }
      cuts.push_back(dt);
      for (std::size_t i = 1; i < cuts.size(); ++i) {
        panel += gl_direct(y_row, sys.A, b, cuts[i - 1], cuts[i]);
      }
    } else {
      for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
        panel += kGlWeights[i] * spectral_norm(h_nodes[i]);
      }
      panel *= dt;
    }
    total += panel;
    t += dt;
    y_row = std::move(y_next);
    h_here = std::move(h_next);

    envelope = std::max(envelope, spectral_norm(h_here) * std::exp(-sigma * t));
    const double tail = envelope * std::exp(sigma * t) / -sigma;
    if (t >= min_horizon && tail <= kTailFraction * total) break;
    if (t >= max_horizon) break;
  }
  return total;
}

double projected_ac_gain(const ImpulseGrid& h_t, const Vector& direction,
                         const MedianOptions& median, bool* converged) {
  const Matrix rows = project_rows(h_t, direction);
  const Vector weights = period_weights(h_t);
  if (converged) *converged = true;
  if (rows.cols() == 1) {
    const std::span<const double> values(rows.data(), static_cast<std::size_t>(rows.rows()));
    const std::span<const double> w(weights.data(), static_cast<std::size_t>(weights.size()));
    const double mu = weighted_scalar_median(values, w);
    return weights.dot((rows.col(0).array() - mu).abs().matrix());
  }
  MedianResult result;
  try {
    result = geometric_median(rows, weights, median);
  } catch (const MedianNoConverge& e) {
    result = e.best();
    if (converged) *converged = false;
  }
  // mad is the weighted mean; the weights sum to T.
  return result.mad * weights.sum();
}

LinearPag linear_pag(const StateSpace& sys, InputChannel channel, double period,
                     const GainOptions& options) {
  require_hurwitz(sys);
  if (!(period > 0.0)) throw Error(ErrorCode::kInvalidArgument, "period must be positive");
  LinearPag pag;
  pag.period = period;
  pag.gamma_dc = spectral_norm(dc_transfer(sys, channel));

  const ImpulseGrid grid = periodic_impulse_response(sys, channel, period, options.grid_n);
  const auto p = sys.p();
  SupResult sup;
  if (p == 1) {
    bool ok = true;
    sup.value = projected_ac_gain(grid, Vector::Ones(1), options.median, &ok);
    sup.certified = ok;
  } else if (p == 2) {
    sup = sup_over_angle(grid, options);
  } else {
    sup = sup_multistart(grid, p, period, options);
  }
  pag.gamma_ac = sup.value;
  pag.quality = sup.certified ? SupQuality::kExact : SupQuality::kLowerEstimate;
  return pag;
}

double linear_pag_conservative(const StateSpace& sys, InputChannel channel, double period,
                               Eigen::Index grid_n) {
  const ImpulseGrid grid = periodic_impulse_response(sys, channel, period, grid_n);
  const Vector weights = period_weights(grid);
  double total = 0.0;
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    total += weights(k) * spectral_norm(grid.samples[static_cast<std::size_t>(k)]);
  }
  total += weights(grid.size()) * spectral_norm(grid.closing);
  return total;
}

SubsystemPags subsystem_pags(const StateSpace& sys, double period, const GainOptions& options) {
  const StateSpace to_state = sys.with_state_output();
  SubsystemPags out;
  out.u_to_x = linear_pag(to_state, InputChannel::kInput, period, options);
  out.f_to_x = linear_pag(to_state, InputChannel::kNonlinearity, period, options);
  out.u_to_y = linear_pag(sys, InputChannel::kInput, period, options);
  out.f_to_y = linear_pag(sys, InputChannel::kNonlinearity, period, options);
  return out;
}

SubsystemPags output_pags(const StateSpace& sys, double period, const GainOptions& options) {
  SubsystemPags out;
  out.u_to_y = linear_pag(sys, InputChannel::kInput, period, options);
  out.f_to_y = linear_pag(sys, InputChannel::kNonlinearity, period, options);
  return out;
}

QuadResolution quad_resolve(double a, double c, double cap) {
  if (!(a >= 0.0) || !(c >= 0.0) || !(cap > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "quad_resolve needs a >= 0, c >= 0, cap > 0");
  }
  if (a * cap * cap + c > cap) return QuadResolution{cap, Branch::kSaturated};
  if (a < 1e-14) return QuadResolution{c, Branch::kRoot};
  // Smaller root of a xi^2 - xi + c, written without the cancellation in
  // (1 - sqrt(1 - 4ac)) / 2a. The branch condition implies 4ac <= 1.
  const double disc = std::max(0.0, 1.0 - 4.0 * a * c);
  return QuadResolution{2.0 * c / (1.0 + std::sqrt(disc)), Branch::kRoot};
}

namespace {

void check_inputs(const NonlinearSystem& nsys, double b, const RhoVector& rho_u) {
  if (!(rho_u.dc >= 0.0) || !(rho_u.ac >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "rho components must be nonnegative");
  }
  if (!(rho_u.one_norm() < nsys.u_max)) {
    throw Error(ErrorCode::kInvalidArgument, "input magnitude must stay below u_max");
  }
  if (rho_u.one_norm() > 0.0 && !(b > 0.0)) {
    throw Error(ErrorCode::kInvalidBound, "invariant-set bound b must be positive");
  }
}

}  // namespace

NonlinearPagResult nonlinear_pag_general(const NonlinearSystem& nsys, const SubsystemPags& pags,
                                         double b, const RhoVector& rho_u) {
  check_inputs(nsys, b, rho_u);
  NonlinearPagResult out;
  out.b = b;
  out.xi_dc = 0.0;
  out.xi_ac = 0.0;
  if (rho_u.one_norm() == 0.0) return out;

  const double mf = nsys.m_f;
  const double mg = nsys.m_g;
  const double dc = rho_u.dc;
  const double ac = rho_u.ac;
  const double rho_sq = dc * dc + ac * ac;

  const double a_ac = 2.0 * mf * pags.f_to_x.gamma_ac;
  const double c_ac = a_ac * ac * ac + pags.u_to_x.gamma_ac * ac;
  const auto xi_ac = quad_resolve(a_ac, c_ac, 2.0 * b);

  const double a_dc = mf * pags.f_to_x.gamma_dc;
  const double c_dc = a_dc * (xi_ac.xi * xi_ac.xi + rho_sq) + pags.u_to_x.gamma_dc * dc;
  const auto xi_dc = quad_resolve(a_dc, c_dc, b);

  const double xi_sq_dc = xi_dc.xi * xi_dc.xi + xi_ac.xi * xi_ac.xi;
  const double xi_sq_ac = 2.0 * xi_ac.xi * xi_ac.xi;
  out.eta_dc = pags.u_to_y.gamma_dc * dc + mf * pags.f_to_y.gamma_dc * rho_sq +
               (mf * pags.f_to_y.gamma_dc + mg) * xi_sq_dc;
  out.eta_ac = pags.u_to_y.gamma_ac * ac + mf * pags.f_to_y.gamma_ac * 2.0 * ac * ac +
               (mf * pags.f_to_y.gamma_ac + mg) * xi_sq_ac;
  out.xi_dc = xi_dc.xi;
  out.xi_ac = xi_ac.xi;
  out.branch_dc = xi_dc.branch;
  out.branch_ac = xi_ac.branch;
  return out;
}

NonlinearPagResult nonlinear_pag_general(const NonlinearSystem& nsys, double period, double b,
                                         const RhoVector& rho_u, const GainOptions& options) {
  check_inputs(nsys, b, rho_u);
  return nonlinear_pag_general(nsys, subsystem_pags(nsys.linear, period, options), b, rho_u);
}

NonlinearPagResult nonlinear_pag_special(const NonlinearSystem& nsys, const SubsystemPags& pags,
                                         double b, const RhoVector& rho_u) {
  if (nsys.structure != Structure::kOutputLurie) {
    throw Error(ErrorCode::kStructureMismatch, "special-structure PAG needs an output-Lurie system");
  }
  check_inputs(nsys, b, rho_u);
  NonlinearPagResult out;
  out.b = b;
  if (rho_u.one_norm() == 0.0) return out;

  const double mf = nsys.m_f;
  const double dc = rho_u.dc;
  const double ac = rho_u.ac;
  const double rho_sq = dc * dc + ac * ac;

  const double a_ac = 2.0 * mf * pags.f_to_y.gamma_ac;
  const double c_ac = a_ac * ac * ac + pags.u_to_y.gamma_ac * ac;
  const auto eta_ac = quad_resolve(a_ac, c_ac, 2.0 * b);

  const double a_dc = mf * pags.f_to_y.gamma_dc;
  const double c_dc = a_dc * (eta_ac.xi * eta_ac.xi + rho_sq) + pags.u_to_y.gamma_dc * dc;
  const auto eta_dc = quad_resolve(a_dc, c_dc, b);

  out.eta_dc = eta_dc.xi;
  out.eta_ac = eta_ac.xi;
  out.branch_dc = eta_dc.branch;
  out.branch_ac = eta_ac.branch;
  return out;
}

NonlinearPagResult nonlinear_pag_special(const NonlinearSystem& nsys, double period, double b,
                                         const RhoVector& rho_u, const GainOptions& options) {
  if (nsys.structure != Structure::kOutputLurie) {
    throw Error(ErrorCode::kStructureMismatch, "special-structure PAG needs an output-Lurie system");
  }
  check_inputs(nsys, b, rho_u);
  return nonlinear_pag_special(nsys, output_pags(nsys.linear, period, options), b, rho_u);
}

RhoVector composition_rho(Composition composition, double level) {
  switch (composition) {
    case Composition::kPureAc: return RhoVector{0.0, level};
    case Composition::kSplit: return RhoVector{0.5 * level, 0.5 * level};
    case Composition::kPureDc: return RhoVector{level, 0.0};
  }
  return {};
}

double mu_slope(const PagFunction& gamma, double level, Composition composition) {
  if (!(level > 0.0)) throw Error(ErrorCode::kInvalidArgument, "level must be positive");
  const auto value = gamma(composition_rho(composition, level));
  return (std::abs(value[0]) + std::abs(value[1])) / level;
}

double mu_slope(const LinearPag& pag, double level, Composition composition) {
  return mu_slope([&](const RhoVector& rho) { return pag.apply(rho); }, level, composition);
}

SharpnessReport sharpness_compare(const std::array<double, 2>& pag_value, double ag_value) {
  SharpnessReport report;
  report.pag_bound = std::abs(pag_value[0]) + std::abs(pag_value[1]);
  report.ag_bound = ag_value;
  const double tie = 1e-12 * std::max({1.0, std::abs(report.pag_bound), std::abs(ag_value)});
  if (std::abs(report.pag_bound - ag_value) <= tie) {
    report.verdict = Verdict::kTie;
  } else {
    report.verdict = report.pag_bound < ag_value ? Verdict::kPagSharper : Verdict::kAgSharper;
  }
  return report;
}

}  // namespace pagkit
