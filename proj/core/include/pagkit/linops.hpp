#pragma once

#include <complex>
#include <vector>

#include "pagkit/model.hpp"

namespace pagkit {

// e^M by scaling and squaring with the degree-13 Pade approximant.
// Throws kExpOverflow when the result is not finite.
Matrix matrix_exponential(const Matrix& m);

struct HurwitzCheck {
  bool hurwitz = false;
  double spectral_abscissa = 0.0;  // max real part of the eigenvalues
};

// Throws kEigFail if the eigen-solver does not converge.
HurwitzCheck is_hurwitz(const Matrix& a);

// Throws kNotHurwitz unless A is Hurwitz; returns the spectral abscissa.
double require_hurwitz(const StateSpace& sys);

// Largest singular value; exact fast paths for vectors.
double spectral_norm(const Matrix& m);
double spectral_norm(const Eigen::MatrixXcd& m);

// G(0) = -C A^{-1} (B or F).
Matrix dc_transfer(const StateSpace& sys, InputChannel channel);

struct FrequencyResponse {
  Eigen::MatrixXcd value;  // C (j omega I - A)^{-1} (B or F)
  double norm = 0.0;       // largest singular value
};

FrequencyResponse frequency_response(const StateSpace& sys, InputChannel channel, double omega);

// Matrix samples H[k] on a uniform time grid t_k = k * step.
struct ImpulseGrid {
  double step = 0.0;
  std::vector<Matrix> samples;
  // For periodic responses: the left limit at t = T, i.e. H_T(T^-) = H_T(0) - H(0).
  // Together with samples[0] it closes the period quadrature.
  Matrix closing;

  Eigen::Index size() const { return static_cast<Eigen::Index>(samples.size()); }
  double span() const { return step * static_cast<double>(samples.size()); }
};

// H(t_k) = C e^{A t_k} (B or F) for k = 0..count-1, using one propagator e^{A step}.
ImpulseGrid impulse_response(const StateSpace& sys, InputChannel channel, double step,
                             Eigen::Index count);

// H_T(t_k) = C e^{A t_k} (I - e^{AT})^{-1} (B or F) on t_k = k T / N, k = 0..N-1.
// Throws kNotHurwitz, or kPeriodSingular when I - e^{AT} is numerically singular.
ImpulseGrid periodic_impulse_response(const StateSpace& sys, InputChannel channel, double period,
                                      Eigen::Index n_samples);

// Solves A^T P + P A = -Q for symmetric P (small dense systems only).
Matrix lyapunov(const Matrix& a, const Matrix& q);

}  // namespace pagkit
