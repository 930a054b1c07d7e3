#include "pagkit/nonlinearity.hpp"

#include <cmath>
#include <map>

namespace pagkit {
namespace {

using Params = NonlinearityDef::Params;
using In = NonlinearityDef::In;

void eval_none(const Params&, const In&, const In&, Eigen::Ref<Vector> out) { out.setZero(); }

Matrix jac_none(const Params&, const In& z, const In&, Eigen::Index q) {
  return Matrix::Zero(q, z.size());
}

// f(z, u) = c |z|^2 in every component; its quadratic remainder constant is
// exactly |c| sqrt(q). params = {c}, default c = 1.
double quadratic_coeff(const Params& params) { return params.empty() ? 1.0 : params[0]; }

void eval_quadratic(const Params& params, const In& z, const In&, Eigen::Ref<Vector> out) {
  out.setConstant(quadratic_coeff(params) * z.squaredNorm());
}

Matrix jac_quadratic(const Params& params, const In& z, const In&, Eigen::Index q) {
  Matrix out(q, z.size());
  out.rowwise() = 2.0 * quadratic_coeff(params) * z.transpose();
  return out;
}

// PLL error dynamics: f(y, u) = y - sin y + u . [cos y - 1; sin y].
void eval_pll(const Params&, const In& y, const In& u, Eigen::Ref<Vector> out) {
  const double s = std::sin(y(0));
  const double c = std::cos(y(0));
  out(0) = y(0) - s + u(0) * (c - 1.0) + u(1) * s;
}

Matrix jac_pll(const Params&, const In& y, const In& u, Eigen::Index) {
  const double s = std::sin(y(0));
  const double c = std::cos(y(0));
  Matrix out(1, 1);
  out(0, 0) = 1.0 - c - u(0) * s + u(1) * c;
  return out;
}

const std::map<std::string, NonlinearityDef>& registry() {
  static const std::map<std::string, NonlinearityDef> defs = {
      {"none", NonlinearityDef{eval_none, jac_none, false}},
      {"pll", NonlinearityDef{eval_pll, jac_pll, true}},
      {"quadratic", NonlinearityDef{eval_quadratic, jac_quadratic, false}},
  };
  return defs;
}

}  // namespace

const NonlinearityDef& lookup_nonlinearity(const std::string& name) {
  const auto& defs = registry();
  const auto it = defs.find(name);
  if (it == defs.end()) {
    throw Error(ErrorCode::kUnknownNonlinearity, "no nonlinearity named '" + name + "'");
  }
  return it->second;
}

std::vector<std::string> registered_nonlinearities() {
  std::vector<std::string> names;
  for (const auto& [name, def] : registry()) names.push_back(name);
  return names;
}

}  // namespace pagkit
