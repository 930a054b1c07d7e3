#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pagkit/error.hpp"

namespace pagkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Which matrix feeds the channel of interest: the external input (B) or the
// nonlinearity injection (F).
enum class InputChannel { kInput, kNonlinearity };

// Linear part of  x' = A x + B u + F f,  y = C x.
struct StateSpace {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix F;

  StateSpace() = default;
  // F defaults to a single zero column when the system has no nonlinearity.
  StateSpace(Matrix a, Matrix b, Matrix c, Matrix f = Matrix());

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return C.rows(); }
  Eigen::Index q() const { return F.cols(); }

  const Matrix& input_map(InputChannel channel) const {
    return channel == InputChannel::kInput ? B : F;
  }

  // Same dynamics with C replaced by the identity (the "to state" channel).
  StateSpace with_state_output() const;
};

enum class Structure { kGeneral, kOutputLurie };

// Reference into the built-in nonlinearity registry.
struct Nonlinearity {
  std::string name = "none";
  std::vector<double> params;
};

struct NonlinearSystem {
  StateSpace linear;
  Nonlinearity nonlinearity;
  double m_f = 0.0;
  double m_g = 0.0;
  Structure structure = Structure::kGeneral;
  double u_max = std::numeric_limits<double>::infinity();

  NonlinearSystem() = default;
  NonlinearSystem(StateSpace lin, Nonlinearity nl, double mf, double mg, Structure s,
                  double umax = std::numeric_limits<double>::infinity());

  // Throws kInvalidArgument / kStructureMismatch when the invariants fail.
  void validate() const;

  // f evaluated at the state (General) or at y = Cx (OutputLurie).
  Vector eval_f(const Vector& x, const Vector& u) const;
  // Jacobian of f with respect to x (q x n), chained through C for OutputLurie.
  Matrix jacobian_fx(const Vector& x, const Vector& u) const;
};

// Uniformly sampled T-periodic signal; row k holds f(k T / N).
class SampledSignal {
 public:
  SampledSignal(double period, Matrix values);

  double period() const { return period_; }
  Eigen::Index size() const { return values_.rows(); }
  Eigen::Index dim() const { return values_.cols(); }
  double step() const { return period_ / static_cast<double>(size()); }
  const Matrix& values() const { return values_; }
  // Index arithmetic wraps modulo N.
  Eigen::VectorXd at(Eigen::Index k) const;

 private:
  double period_;
  Matrix values_;
};

struct RhoVector {
  double dc = 0.0;
  double ac = 0.0;

  double one_norm() const { return dc + ac; }
  double norm() const;
};

struct AcDcParts {
  Vector dc;
  SampledSignal ac;
};

AcDcParts acdc_decompose(const SampledSignal& s);

// (norm of the period mean, grid sup of the deviation from it)
RhoVector rho_of(const SampledSignal& s);

// Grid sup of the Euclidean norm.
double sup_norm(const SampledSignal& s);

struct GainCurveRow {
  double period = 0.0;
  double gamma_dc = 0.0;
  double gamma_ac_exact = 0.0;
  double gamma_ac_conservative = 0.0;
  double ag_slope = 0.0;
  double freq_resp_norm = 0.0;
  double eta_dc = std::numeric_limits<double>::quiet_NaN();
  double eta_ac = std::numeric_limits<double>::quiet_NaN();
  double mu = std::numeric_limits<double>::quiet_NaN();
};

class GainCurve {
 public:
  GainCurve() = default;
  // Rows must be sorted by strictly increasing period.
  explicit GainCurve(std::vector<GainCurveRow> rows);

  void append(const GainCurveRow& row);
  const std::vector<GainCurveRow>& rows() const { return rows_; }

 private:
  std::vector<GainCurveRow> rows_;
};

}  // namespace pagkit
