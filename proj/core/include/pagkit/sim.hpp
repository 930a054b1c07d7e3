#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pagkit/gains.hpp"
#include "pagkit/model.hpp"

namespace pagkit {

// Samples at t0 + k dt for k = 0..K-1.
struct Trajectory {
  double t0 = 0.0;
  double dt = 0.0;
  Matrix states;   // K x n
  Matrix outputs;  // K x p
};

// Fixed-step RK4 over `periods` full periods of the input. The input is held
// constant over each step (zero-order hold), so step boundaries coincide with
// input switches. Returns K = periods * N + 1 samples including the endpoint.
// Throws kDiverged on a non-finite state.
Trajectory integrate(const NonlinearSystem& nsys, const SampledSignal& input, const Vector& x0,
                     int periods);

struct PssOptions {
  double tol = 1e-10;      // relative, on the stroboscopic map increment
  int max_periods = 20000;
};

struct PeriodicOrbit {
  SampledSignal states;   // one period, N x n
  SampledSignal outputs;  // one period, N x p
  int periods_used = 0;
  Vector end_state;       // x(kT) at convergence
};

// Iterates the stroboscopic map x(0) -> x(T) until
// |x(kT) - x((k-1)T)| <= tol (1 + |x(kT)|). Throws kNoPss.
PeriodicOrbit periodic_steady_state(const NonlinearSystem& nsys, const SampledSignal& input,
                                    const Vector& x0, const PssOptions& options = {});

enum class InputKind { kHarmonicRandom, kBangBang, kCustom };

struct Harmonic {
  int order = 1;
  Vector amplitude;  // per channel
  Vector phase;      // per channel, radians
};

struct InputSpec {
  InputKind kind = InputKind::kHarmonicRandom;
  double period = 1.0;
  Vector dc;                       // direction (rescaled to dc_cap)
  std::vector<Harmonic> harmonics;
  std::uint64_t seed = 0;
  double dc_cap = 0.0;
  double ac_cap = 0.0;
};

// Evaluates the InputSpec on an N-point grid and post-scales so that |u_dc| and the
// grid sup of |u_ac| equal the caps exactly.
SampledSignal realize(const InputSpec& spec, Eigen::Index grid_n);

// Seeded draw: uniform amplitudes in [0, 1], uniform phases, uniformly random
// DC direction. rho_of(result) equals composition_rho(composition, level).
InputSpec random_harmonic_spec(double period, Eigen::Index channels, int n_harmonics,
                               Composition composition, double level, std::uint64_t seed);
SampledSignal random_harmonic_input(double period, Eigen::Index grid_n, Eigen::Index channels,
                                    int n_harmonics, Composition composition, double level,
                                    std::uint64_t seed);

// Input that drives v . y to its extreme value at t = 0 mod T:
// u(-tau) = ac_cap (v.H_T(tau) - mu) / |v.H_T(tau) - mu|, mu the geometric
// median of v.H_T. Zero where the denominator vanishes; the grid mean is
// removed and the sup re-capped.
SampledSignal bangbang_worst_input(const StateSpace& sys, InputChannel channel, double period,
                                   Eigen::Index grid_n, const Vector& direction, double ac_cap,
                                   const MedianOptions& median = {});

struct ContractionReport {
  double max_log_norm = 0.0;           // Euclidean, max over (x, u) samples
  double max_weighted_log_norm = 0.0;  // in the metric P of A when A is Hurwitz
  bool weighted = false;
  bool plausibly_contractive = false;  // heuristic, not a proof
  std::size_t worst_state = 0;
  std::size_t worst_input = 0;
};

// Logarithmic norms of J = A + F df/dx over the sampled region: the largest
// eigenvalue of sym(J), and of L^{-1} sym(P J) L^{-T} with P = L L^T solving
// S^T P + P S = -I for S = A - 0.9 sigma(A) I. The verdict uses the weighted
// value when A is Hurwitz (weighted == true) and the Euclidean one otherwise.
ContractionReport contraction_check(const NonlinearSystem& nsys,
                                    const std::vector<Vector>& region_samples,
                                    const std::vector<Vector>& input_samples);

struct BEstimateOptions {
  std::vector<double> periods = {0.02};
  int n_trials = 30;
  int n_harmonics = 5;
  Eigen::Index grid_n = 4096;
  double safety = 1.5;
  bool include_bangbang = true;
  PssOptions pss;
  int jobs = 1;
};

struct BEstimate {
  double b = 0.0;
  double max_observed = 0.0;
  bool heuristic = true;
};

// Heuristic invariant-set bound: safety * max over randomized periodic inputs
// of sup_t |x_hat(t)| (or |C x_hat(t)| for output-Lurie systems).
// Throws kUnboundedSuspect if any trial diverges.
BEstimate estimate_b(const NonlinearSystem& nsys, double level, std::uint64_t seed,
                     const BEstimateOptions& options = {});

}  // namespace pagkit
