#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pagkit/model.hpp"

namespace pagkit {

// A registered nonlinearity f(z, u) where z is the state (General) or the
// output y = Cx (OutputLurie).
struct NonlinearityDef {
  using Params = std::vector<double>;
  using In = Eigen::Ref<const Vector>;

  // Writes f(z, u) into `out` (length q); must not allocate.
  std::function<void(const Params& params, const In& z, const In& u, Eigen::Ref<Vector> out)> eval;
  // d f / d z, q x dim(z).
  std::function<Matrix(const Params& params, const In& z, const In& u, Eigen::Index q)> jacobian_z;
  // Set when f reads only y = Cx.
  bool output_lurie_only = false;
};

// Throws kUnknownNonlinearity.
const NonlinearityDef& lookup_nonlinearity(const std::string& name);
std::vector<std::string> registered_nonlinearities();

}  // namespace pagkit
