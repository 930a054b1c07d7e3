#include "pagkit/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "pagkit/linops.hpp"
#include "pagkit/median.hpp"
#include "pagkit/nonlinearity.hpp"
#include "pagkit/parallel.hpp"
#include "pagkit/random.hpp"

namespace pagkit {
namespace {

// Right-hand side with preallocated scratch; no allocation per call.
class Dynamics {
 public:
  explicit Dynamics(const NonlinearSystem& nsys)
      : sys_(nsys.linear),
        def_(lookup_nonlinearity(nsys.nonlinearity.name)),
        params_(nsys.nonlinearity.params),
        output_lurie_(nsys.structure == Structure::kOutputLurie),
        linear_(nsys.nonlinearity.name == "none"),
        bu_(nsys.linear.n()),
        z_(output_lurie_ ? nsys.linear.p() : nsys.linear.n()),
        f_(nsys.linear.q()) {}

  // Input held over the coming step.
  void hold(const Eigen::Ref<const Vector>& u) {
    u_ = u;
    bu_.noalias() = sys_.B * u_;
  }

  void operator()(const Vector& x, Vector& dx) {
    dx.noalias() = sys_.A * x;
    dx += bu_;
    if (linear_) return;
    if (output_lurie_) {
      z_.noalias() = sys_.C * x;
      def_.eval(params_, z_, u_, f_);
    } else {
      def_.eval(params_, x, u_, f_);
    }
    dx.noalias() += sys_.F * f_;
  }

 private:
  const StateSpace& sys_;
  const NonlinearityDef& def_;
  const std::vector<double>& params_;
  bool output_lurie_;
  bool linear_;
  Vector u_;
  Vector bu_;
  Vector z_;
  Vector f_;
};

class Rk4 {
 public:
  explicit Rk4(const NonlinearSystem& nsys)
      : rhs_(nsys),
        k1_(nsys.linear.n()),
        k2_(nsys.linear.n()),
        k3_(nsys.linear.n()),
        k4_(nsys.linear.n()),
        tmp_(nsys.linear.n()) {}

  void step(Vector& x, const Eigen::Ref<const Vector>& u, double h) {
    rhs_.hold(u);
    rhs_(x, k1_);
    tmp_ = x + (0.5 * h) * k1_;
    rhs_(tmp_, k2_);
    tmp_ = x + (0.5 * h) * k2_;
    rhs_(tmp_, k3_);
    tmp_ = x + h * k3_;
    rhs_(tmp_, k4_);
    x += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
  }

 private:
  Dynamics rhs_;
  Vector k1_, k2_, k3_, k4_, tmp_;
};

void check_input(const NonlinearSystem& nsys, const SampledSignal& input, const Vector& x0) {
  if (input.dim() != nsys.linear.m()) {
    throw Error(ErrorCode::kDimensionMismatch, "input width must equal m");
  }
  if (x0.size() != nsys.linear.n()) {
    throw Error(ErrorCode::kDimensionMismatch, "initial state must have length n");
  }
  if (!input.values().allFinite() || !x0.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "input and initial state must be finite");
  }
}

[[noreturn]] void throw_diverged(long long index) {
  throw Error(ErrorCode::kDiverged,
              "state became non-finite after sample " + std::to_string(index));
}

// Integrates one period from x, writing the N pre-step states into `record`.
void one_period(Rk4& rk, Vector& x, const SampledSignal& input, Matrix* record,
                long long base_index) {
  const auto n = input.size();
  const double h = input.step();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (record) record->row(j) = x.transpose();
    rk.step(x, input.values().row(j).transpose(), h);
    if (!x.allFinite()) throw_diverged(base_index + j);
  }
}

double largest_symmetric_eigenvalue(const Matrix& m) {
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::kEigFail, "symmetric eigensolver failed");
  return solver.eigenvalues().maxCoeff();
}

Vector random_direction(std::mt19937_64& rng, Eigen::Index dim) {
  Vector v(dim);
  do {
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = standard_normal(rng);
  } while (v.norm() == 0.0);
  return v.normalized();
}

// The metric solves the Lyapunov equation of A - 0.9 sigma(A) I, which keeps
// about 90% of the decay rate of A in mu_P(A).
constexpr double kMetricShift = 0.9;

}  // namespace

Trajectory integrate(const NonlinearSystem& nsys, const SampledSignal& input, const Vector& x0,
                     int periods) {
  check_input(nsys, input, x0);
  if (periods < 1) throw Error(ErrorCode::kInvalidArgument, "periods must be >= 1");
  const auto n = input.size();
  const Eigen::Index total = n * periods + 1;
  Trajectory out;
  out.dt = input.step();
  out.states.resize(total, nsys.linear.n());
  Rk4 rk(nsys);
  Vector x = x0;
  for (Eigen::Index k = 0; k + 1 < total; ++k) {
    out.states.row(k) = x.transpose();
    rk.step(x, input.values().row(k % n).transpose(), out.dt);
    if (!x.allFinite()) throw_diverged(k);
  }
  out.states.row(total - 1) = x.transpose();
  out.outputs = out.states * nsys.linear.C.transpose();
  return out;
}

PeriodicOrbit periodic_steady_state(const NonlinearSystem& nsys, const SampledSignal& input,
                                    const Vector& x0, const PssOptions& options) {
  check_input(nsys, input, x0);
  if (!(options.tol > 0.0) || options.max_periods < 1) {
    throw Error(ErrorCode::kInvalidArgument, "need tol > 0 and max_periods >= 1");
  }
  Rk4 rk(nsys);
  Matrix record(input.size(), nsys.linear.n());
  Vector x = x0;
  Vector previous(x.size());
  for (int k = 1; k <= options.max_periods; ++k) {
    previous = x;
    one_period(rk, x, input, &record, static_cast<long long>(k - 1) * input.size());
    if ((x - previous).norm() <= options.tol * (1.0 + x.norm())) {
      Matrix outputs = record * nsys.linear.C.transpose();
      return PeriodicOrbit{SampledSignal(input.period(), std::move(record)),
                           SampledSignal(input.period(), std::move(outputs)), k, x};
    }
  }
  throw Error(ErrorCode::kNoPss, "no periodic steady state within " +
                                     std::to_string(options.max_periods) + " periods");
}

SampledSignal realize(const InputSpec& spec, Eigen::Index grid_n) {
  if (grid_n < 2) throw Error(ErrorCode::kInvalidArgument, "grid needs N >= 2");
  if (!(spec.dc_cap >= 0.0) || !(spec.ac_cap >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "caps must be nonnegative");
  }
  const Eigen::Index m = spec.dc.size();
  if (m == 0) throw Error(ErrorCode::kDimensionMismatch, "input spec has no channels");
  Matrix ac = Matrix::Zero(grid_n, m);
  for (const auto& harmonic : spec.harmonics) {
    if (harmonic.amplitude.size() != m || harmonic.phase.size() != m) {
      throw Error(ErrorCode::kDimensionMismatch, "harmonic width must equal the DC width");
    }
    for (Eigen::Index j = 0; j < grid_n; ++j) {
      const double angle =
          2.0 * std::numbers::pi * harmonic.order * static_cast<double>(j) / grid_n;
      for (Eigen::Index c = 0; c < m; ++c) {
        ac(j, c) += harmonic.amplitude(c) * std::cos(angle + harmonic.phase(c));
      }
    }
  }
  // Harmonic sums are zero-mean on the grid only up to rounding.
  ac.rowwise() -= ac.colwise().mean();
  const double sup = ac.rowwise().norm().maxCoeff();
  if (sup > 0.0) ac *= spec.ac_cap / sup;

  Vector dc = Vector::Zero(m);
  const double dc_norm = spec.dc.norm();
  if (dc_norm > 0.0) dc = spec.dc * (spec.dc_cap / dc_norm);
  Matrix values = ac.rowwise() + dc.transpose();
  return SampledSignal(spec.period, std::move(values));
}

InputSpec random_harmonic_spec(double period, Eigen::Index channels, int n_harmonics,
                               Composition composition, double level, std::uint64_t seed) {
  if (!(level > 0.0)) throw Error(ErrorCode::kInvalidArgument, "level must be positive");
  if (channels < 1 || n_harmonics < 1) {
    throw Error(ErrorCode::kInvalidArgument, "need at least one channel and one harmonic");
  }
  std::mt19937_64 rng(seed);
  InputSpec spec;
  spec.kind = InputKind::kHarmonicRandom;
  spec.period = period;
  spec.seed = seed;
  const RhoVector caps = composition_rho(composition, level);
  spec.dc_cap = caps.dc;
  spec.ac_cap = caps.ac;
  spec.dc = random_direction(rng, channels);
  for (int k = 1; k <= n_harmonics; ++k) {
    Harmonic h;
    h.order = k;
    h.amplitude.resize(channels);
    h.phase.resize(channels);
    for (Eigen::Index c = 0; c < channels; ++c) {
      h.amplitude(c) = uniform01(rng);
      h.phase(c) = 2.0 * std::numbers::pi * uniform01(rng);
    }
    spec.harmonics.push_back(std::move(h));
  }
  return spec;
}

SampledSignal random_harmonic_input(double period, Eigen::Index grid_n, Eigen::Index channels,
                                    int n_harmonics, Composition composition, double level,
                                    std::uint64_t seed) {
  return realize(random_harmonic_spec(period, channels, n_harmonics, composition, level, seed),
                 grid_n);
}

SampledSignal bangbang_worst_input(const StateSpace& sys, InputChannel channel, double period,
                                   Eigen::Index grid_n, const Vector& direction, double ac_cap,
                                   const MedianOptions& median) {
  if (direction.size() != sys.p() || std::abs(direction.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "direction must be a unit p-vector");
  }
  if (!(ac_cap >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "ac_cap must be nonnegative");
  const ImpulseGrid grid = periodic_impulse_response(sys, channel, period, grid_n);
  const Eigen::Index m = grid.closing.cols();

  // rows(k) = v^T H_T(k h), k = 0..N with the closing sample last.
  Matrix rows(grid_n + 1, m);
  for (Eigen::Index k = 0; k < grid_n; ++k) {
    rows.row(k).noalias() = direction.transpose() * grid.samples[static_cast<std::size_t>(k)];
  }
  rows.row(grid_n).noalias() = direction.transpose() * grid.closing;
  Vector weights = Vector::Constant(grid_n + 1, grid.step);
  weights(0) *= 0.5;
  weights(grid_n) *= 0.5;

  Vector mu(m);
  if (m == 1) {
    mu(0) = weighted_scalar_median(
        std::span<const double>(rows.data(), static_cast<std::size_t>(rows.rows())),
        std::span<const double>(weights.data(), static_cast<std::size_t>(weights.size())));
  } else {
    try {
      mu = geometric_median(rows, weights, median).mu;
    } catch (const MedianNoConverge& e) {
      mu = e.best().mu;
    }
  }

  // Under zero-order hold u[j] acts for tau in (k h, (k+1) h) with
  // k = N - 1 - j; use the interval midpoint of v.H_T.
  const double scale = std::max(1.0, rows.cwiseAbs().maxCoeff());
  Matrix values = Matrix::Zero(grid_n, m);
  for (Eigen::Index j = 0; j < grid_n; ++j) {
    const Eigen::Index k = grid_n - 1 - j;
    const Eigen::RowVectorXd centred = 0.5 * (rows.row(k) + rows.row(k + 1)) - mu.transpose();
    const double norm = centred.norm();
    if (norm >= 1e-12 * scale) values.row(j) = centred / norm;
  }
  values.rowwise() -= values.colwise().mean();
  const double sup = values.rowwise().norm().maxCoeff();
  if (sup > 0.0) values *= ac_cap / sup;
  return SampledSignal(period, std::move(values));
}

ContractionReport contraction_check(const NonlinearSystem& nsys,
                                    const std::vector<Vector>& region_samples,
                                    const std::vector<Vector>& input_samples) {
  if (region_samples.empty() || input_samples.empty()) {
    throw Error(ErrorCode::kEmpty, "contraction check needs state and input samples");
  }
  const auto& sys = nsys.linear;
  ContractionReport report;
  const HurwitzCheck stability = is_hurwitz(sys.A);
  report.weighted = stability.hurwitz;
  Matrix p_metric;
  Matrix l_inv;
  if (report.weighted) {
    const Matrix identity = Matrix::Identity(sys.n(), sys.n());
    const Matrix shifted = sys.A - kMetricShift * stability.spectral_abscissa * identity;
    p_metric = lyapunov(shifted, identity);
    const Eigen::LLT<Matrix> llt(p_metric);
    if (llt.info() != Eigen::Success) {
      report.weighted = false;
    } else {
      l_inv = llt.matrixL().solve(Matrix::Identity(sys.n(), sys.n()));
    }
  }
  report.max_log_norm = -std::numeric_limits<double>::infinity();
  report.max_weighted_log_norm = -std::numeric_limits<double>::infinity();
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < region_samples.size(); ++i) {
    for (std::size_t j = 0; j < input_samples.size(); ++j) {
      const Matrix jac = sys.A + sys.F * nsys.jacobian_fx(region_samples[i], input_samples[j]);
      const double plain = largest_symmetric_eigenvalue(jac);
      report.max_log_norm = std::max(report.max_log_norm, plain);
      double verdict_value = plain;
      if (report.weighted) {
        const Matrix pj = p_metric * jac;
        const Matrix sym = 0.5 * (pj + pj.transpose());
        const double weighted = largest_symmetric_eigenvalue(l_inv * sym * l_inv.transpose());
        report.max_weighted_log_norm = std::max(report.max_weighted_log_norm, weighted);
        verdict_value = weighted;
      }
      if (verdict_value > worst) {
        worst = verdict_value;
        report.worst_state = i;
        report.worst_input = j;
      }
    }
  }
  if (!report.weighted) report.max_weighted_log_norm = report.max_log_norm;
  report.plausibly_contractive = worst < 0.0;
  return report;
}

BEstimate estimate_b(const NonlinearSystem& nsys, double level, std::uint64_t seed,
                     const BEstimateOptions& options) {
  if (!(level >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "level must be nonnegative");
  if (!(level < nsys.u_max)) throw Error(ErrorCode::kInvalidArgument, "level must stay below u_max");
  if (options.periods.empty()) throw Error(ErrorCode::kEmpty, "estimate_b needs a period");
  BEstimate out;
  if (level == 0.0) return out;

  const auto& sys = nsys.linear;
  const bool on_output = nsys.structure == Structure::kOutputLurie;
  constexpr std::array<Composition, 3> kAll = {Composition::kPureAc, Composition::kSplit,
                                               Composition::kPureDc};
  const auto n_periods = options.periods.size();
  const std::size_t random_trials = static_cast<std::size_t>(std::max(0, options.n_trials));
  const std::size_t bang_trials = options.include_bangbang ? n_periods : 0;

  auto make_input = [&](std::size_t trial) {
    if (trial < random_trials) {
      const double period = options.periods[trial % n_periods];
      const Composition comp = kAll[(trial / n_periods) % kAll.size()];
      return random_harmonic_input(period, options.grid_n, sys.m(), options.n_harmonics, comp,
                                   level, derive_seed(seed, {trial}));
    }
    const double period = options.periods[trial - random_trials];
    Vector v = Vector::Zero(sys.p());
    v(0) = 1.0;
    return bangbang_worst_input(sys, InputChannel::kInput, period, options.grid_n, v, level);
  };

  const auto sups = parallel_map<double>(random_trials + bang_trials, options.jobs,
                                         [&](std::size_t trial) {
    const SampledSignal input = make_input(trial);
    try {
      const auto orbit =
          periodic_steady_state(nsys, input, Vector::Zero(sys.n()), options.pss);
      return on_output ? sup_norm(orbit.outputs) : sup_norm(orbit.states);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kDiverged || e.code() == ErrorCode::kNoPss) {
        throw Error(ErrorCode::kUnboundedSuspect,
                    "trial " + std::to_string(trial) + " did not settle: " + e.what());
      }
      throw;
    }
  });
  for (const double s : sups) out.max_observed = std::max(out.max_observed, s);
  out.b = options.safety * out.max_observed;
  return out;
}

}  // namespace pagkit
