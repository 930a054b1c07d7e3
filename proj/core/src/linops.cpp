#include "pagkit/linops.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace pagkit {
namespace {

// Degree-13 Pade coefficients and the matching 1-norm threshold.
constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};
constexpr double kTheta13 = 5.371920351148152;

double one_norm(const Matrix& m) { return m.cwiseAbs().colwise().sum().maxCoeff(); }

Matrix kronecker(const Matrix& x, const Matrix& y) {
  Matrix out(x.rows() * y.rows(), x.cols() * y.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      out.block(i * y.rows(), j * y.cols(), y.rows(), y.cols()) = x(i, j) * y;
    }
  }
  return out;
}

}  // namespace

Matrix matrix_exponential(const Matrix& m) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::kDimensionMismatch, "expm needs a square matrix");
  if (!m.allFinite()) throw Error(ErrorCode::kExpOverflow, "expm input is not finite");
  const auto n = m.rows();
  if (n == 0) return m;

  const double norm = one_norm(m);
  if (norm == 0.0) return Matrix::Identity(n, n);
  int squarings = 0;
  if (norm > kTheta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / kTheta13)));
  }
  const Matrix a = m / std::ldexp(1.0, squarings);

  const Matrix id = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  const auto& b = kPade13;
  const Matrix u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
                         b[3] * a2 + b[1] * id;
  const Matrix u = a * u_inner;
  const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                   b[2] * a2 + b[0] * id;

  Matrix result = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) {
    result = result * result;
    if (!result.allFinite()) break;
  }
  if (!result.allFinite()) throw Error(ErrorCode::kExpOverflow, "matrix exponential overflowed");
  return result;
}

HurwitzCheck is_hurwitz(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "Hurwitz check needs a square matrix");
  }
  Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::kEigFail, "eigenvalue solver failed");
  const double abscissa = solver.eigenvalues().real().maxCoeff();
  return HurwitzCheck{abscissa < 0.0, abscissa};
}

double require_hurwitz(const StateSpace& sys) {
  const auto check = is_hurwitz(sys.A);
  if (!check.hurwitz) {
    throw Error(ErrorCode::kNotHurwitz,
                "A is not Hurwitz (spectral abscissa " + std::to_string(check.spectral_abscissa) + ")");
  }
  return check.spectral_abscissa;
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double spectral_norm(const Eigen::MatrixXcd& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues()(0);
}

Matrix dc_transfer(const StateSpace& sys, InputChannel channel) {
  require_hurwitz(sys);
  const auto lu = sys.A.fullPivLu();
  if (!lu.isInvertible()) throw Error(ErrorCode::kNotHurwitz, "A is singular");
  return -sys.C * lu.solve(sys.input_map(channel));
}

FrequencyResponse frequency_response(const StateSpace& sys, InputChannel channel, double omega) {
  require_hurwitz(sys);
  using Complex = std::complex<double>;
  if (omega == 0.0) {
    FrequencyResponse out;
    out.value = dc_transfer(sys, channel).cast<Complex>();
    out.norm = spectral_norm(out.value);
    return out;
  }
  Eigen::MatrixXcd resolvent = -sys.A.cast<Complex>();
  resolvent.diagonal().array() += Complex(0.0, omega);
  const Eigen::MatrixXcd x = resolvent.partialPivLu().solve(sys.input_map(channel).cast<Complex>());
  FrequencyResponse out;
  out.value = sys.C.cast<Complex>() * x;
  out.norm = spectral_norm(out.value);
  return out;
}

ImpulseGrid impulse_response(const StateSpace& sys, InputChannel channel, double step,
                             Eigen::Index count) {
  require_hurwitz(sys);
  if (!(step > 0.0) || count < 1) {
    throw Error(ErrorCode::kInvalidArgument, "impulse grid needs step > 0 and count >= 1");
  }
  const Matrix propagator = matrix_exponential(sys.A * step);
  ImpulseGrid grid;
  grid.step = step;
  grid.samples.reserve(static_cast<std::size_t>(count));
  Matrix state = sys.input_map(channel);  // e^{A t_k} (B or F)
  for (Eigen::Index k = 0; k < count; ++k) {
    grid.samples.push_back(sys.C * state);
    state = propagator * state;
  }
  grid.closing = sys.C * state;
  return grid;
}

ImpulseGrid periodic_impulse_response(const StateSpace& sys, InputChannel channel, double period,
                                      Eigen::Index n_samples) {
  require_hurwitz(sys);
  if (!(period > 0.0) || !std::isfinite(period) || n_samples < 2) {
    throw Error(ErrorCode::kInvalidArgument, "periodic impulse grid needs T > 0 and N >= 2");
  }
  const auto n = sys.n();
  const Matrix monodromy = matrix_exponential(sys.A * period);
  const Matrix gap = Matrix::Identity(n, n) - monodromy;
  const auto lu = gap.fullPivLu();
  // rcond estimate from the pivots; I - e^{AT} is invertible iff A has no
  // eigenvalue on the imaginary axis lattice 2 pi j k / T.
  const double rcond = lu.rank() < n ? 0.0
                                     : lu.matrixLU().diagonal().cwiseAbs().minCoeff() /
                                           lu.matrixLU().diagonal().cwiseAbs().maxCoeff();
  if (rcond < 1e-14) {
    throw Error(ErrorCode::kPeriodSingular, "I - e^{AT} is numerically singular");
  }
  const Matrix wrapped_input = lu.solve(sys.input_map(channel));

  const double step = period / static_cast<double>(n_samples);
  const Matrix propagator = matrix_exponential(sys.A * step);
  ImpulseGrid grid;
  grid.step = step;
  grid.samples.reserve(static_cast<std::size_t>(n_samples));
  Matrix state = wrapped_input;
  for (Eigen::Index k = 0; k < n_samples; ++k) {
    grid.samples.push_back(sys.C * state);
    state = propagator * state;
  }
  // Closed form for the left limit at T avoids accumulating N propagator products.
  grid.closing = sys.C * monodromy * wrapped_input;
  return grid;
}

Matrix lyapunov(const Matrix& a, const Matrix& q) {
  const auto n = a.rows();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix at = a.transpose();
  const Matrix kron = kronecker(id, at) + kronecker(at, id);
  const Vector rhs = -Eigen::Map<const Vector>(q.data(), q.size());
  const Vector sol = kron.fullPivLu().solve(rhs);
  Matrix p = Eigen::Map<const Matrix>(sol.data(), n, n);
  return 0.5 * (p + p.transpose());
}

}  // namespace pagkit
