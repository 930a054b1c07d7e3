#include "pagkit/model.hpp"

#include <cmath>

#include "pagkit/nonlinearity.hpp"

namespace pagkit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kExpOverflow: return "exp-overflow";
    case ErrorCode::kEigFail: return "eig-fail";
    case ErrorCode::kNotHurwitz: return "not-hurwitz";
    case ErrorCode::kPeriodSingular: return "period-singular";
    case ErrorCode::kEmpty: return "empty";
    case ErrorCode::kNoConverge: return "no-converge";
    case ErrorCode::kInvalidBound: return "invalid-bound";
    case ErrorCode::kStructureMismatch: return "structure-mismatch";
    case ErrorCode::kDiverged: return "diverged";
    case ErrorCode::kNoPss: return "no-pss";
    case ErrorCode::kUnboundedSuspect: return "unbounded-suspect";
    case ErrorCode::kUnknownNonlinearity: return "unknown-nonlinearity";
  }
  return "unknown";
}

StateSpace::StateSpace(Matrix a, Matrix b, Matrix c, Matrix f)
    : A(std::move(a)), B(std::move(b)), C(std::move(c)), F(std::move(f)) {
  if (F.size() == 0) F = Matrix::Zero(A.rows(), 1);
  const auto n = A.rows();
  if (n == 0 || A.cols() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "A must be square and non-empty");
  }
  if (B.rows() != n || B.cols() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "B must have n rows and at least one column");
  }
  if (C.cols() != n || C.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "C must have n columns and at least one row");
  }
  if (F.rows() != n || F.cols() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "F must have n rows and at least one column");
  }
  if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !F.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "state-space matrices must be finite");
  }
}

StateSpace StateSpace::with_state_output() const {
  return StateSpace(A, B, Matrix::Identity(n(), n()), F);
}

NonlinearSystem::NonlinearSystem(StateSpace lin, Nonlinearity nl, double mf, double mg,
                                 Structure s, double umax)
    : linear(std::move(lin)),
      nonlinearity(std::move(nl)),
      m_f(mf),
      m_g(mg),
      structure(s),
      u_max(umax) {
  validate();
}

void NonlinearSystem::validate() const {
  if (!(m_f >= 0.0) || !(m_g >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "M_f and M_g must be nonnegative");
  }
  if (!(u_max > 0.0)) throw Error(ErrorCode::kInvalidArgument, "u_max must be positive");
  const auto& def = lookup_nonlinearity(nonlinearity.name);
  if (nonlinearity.name == "none" && (m_f != 0.0 || m_g != 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "nonlinearity 'none' requires M_f = M_g = 0");
  }
  if (structure == Structure::kOutputLurie && m_g != 0.0) {
    throw Error(ErrorCode::kStructureMismatch, "output-Lurie systems have g = 0, so M_g = 0");
  }
  if (def.output_lurie_only && structure != Structure::kOutputLurie) {
    throw Error(ErrorCode::kStructureMismatch,
                "nonlinearity '" + nonlinearity.name + "' requires the output-Lurie structure");
  }
  if (nonlinearity.name == "pll" &&
      (linear.p() != 1 || linear.m() != 2 || linear.q() != 1)) {
    throw Error(ErrorCode::kDimensionMismatch, "'pll' needs p = 1, m = 2, q = 1");
  }
}

Vector NonlinearSystem::eval_f(const Vector& x, const Vector& u) const {
  const auto& def = lookup_nonlinearity(nonlinearity.name);
  Vector out(linear.q());
  if (structure == Structure::kOutputLurie) {
    const Vector y = linear.C * x;
    def.eval(nonlinearity.params, y, u, out);
  } else {
    def.eval(nonlinearity.params, x, u, out);
  }
  return out;
}

Matrix NonlinearSystem::jacobian_fx(const Vector& x, const Vector& u) const {
  const auto& def = lookup_nonlinearity(nonlinearity.name);
  if (structure == Structure::kOutputLurie) {
    return def.jacobian_z(nonlinearity.params, linear.C * x, u, linear.q()) * linear.C;
  }
  return def.jacobian_z(nonlinearity.params, x, u, linear.q());
}

SampledSignal::SampledSignal(double period, Matrix values)
    : period_(period), values_(std::move(values)) {
  if (!(period_ > 0.0) || !std::isfinite(period_)) {
    throw Error(ErrorCode::kInvalidArgument, "signal period must be positive and finite");
  }
  if (values_.rows() < 2) throw Error(ErrorCode::kInvalidArgument, "signal needs N >= 2");
  if (values_.cols() < 1) throw Error(ErrorCode::kInvalidArgument, "signal needs d >= 1");
}

Eigen::VectorXd SampledSignal::at(Eigen::Index k) const {
  const auto n = size();
  const auto wrapped = ((k % n) + n) % n;
  return values_.row(wrapped).transpose();
}

double RhoVector::norm() const { return std::hypot(dc, ac); }

AcDcParts acdc_decompose(const SampledSignal& s) {
  const Vector dc = s.values().colwise().mean().transpose();
  Matrix ac = s.values().rowwise() - dc.transpose();
  return AcDcParts{dc, SampledSignal(s.period(), std::move(ac))};
}

RhoVector rho_of(const SampledSignal& s) {
  const auto parts = acdc_decompose(s);
  return RhoVector{parts.dc.norm(), parts.ac.values().rowwise().norm().maxCoeff()};
}

double sup_norm(const SampledSignal& s) { return s.values().rowwise().norm().maxCoeff(); }

GainCurve::GainCurve(std::vector<GainCurveRow> rows) {
  for (const auto& row : rows) append(row);
}

void GainCurve::append(const GainCurveRow& row) {
  if (!rows_.empty() && !(row.period > rows_.back().period)) {
    throw Error(ErrorCode::kInvalidArgument, "gain curve periods must increase strictly");
  }
  rows_.push_back(row);
}

}  // namespace pagkit
