#include "pagkit/median.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace pagkit {
namespace {

constexpr double kCoincidence = 1e-14;

struct Subgradient {
  Vector pull;          // sum over non-coincident points of w_i (p_i - y) / |p_i - y|
  double anchored = 0;  // weight sitting exactly at y
  double inv_dist_sum = 0;
  Vector weighted_sum;  // sum w_i p_i / |p_i - y|
  double objective = 0;
};

// cols of `pts` are points, weights sum to 1.
Subgradient evaluate(const Matrix& pts, const Vector& w, const Vector& y, double coincide) {
  const auto d = pts.rows();
  Subgradient s;
  s.pull = Vector::Zero(d);
  s.weighted_sum = Vector::Zero(d);
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const double dist = (pts.col(i) - y).norm();
    s.objective += w(i) * dist;
    if (dist < coincide) {
      s.anchored += w(i);
      continue;
    }
    const double scale = w(i) / dist;
    s.pull.noalias() += scale * (pts.col(i) - y);
    s.weighted_sum.noalias() += scale * pts.col(i);
    s.inv_dist_sum += scale;
  }
  return s;
}

double residual_of(const Subgradient& s) { return std::max(0.0, s.pull.norm() - s.anchored); }

}  // namespace

double scalar_median(std::span<const double> samples) {
  if (samples.empty()) throw Error(ErrorCode::kEmpty, "median of an empty sample");
  std::vector<double> v(samples.begin(), samples.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double weighted_scalar_median(std::span<const double> values, std::span<const double> weights) {
  if (values.empty()) throw Error(ErrorCode::kEmpty, "median of an empty sample");
  if (values.size() != weights.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "values and weights differ in length");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double half = 0.5 * total;
  const double slack = 1e-13 * total;
  double cumulative = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    cumulative += weights[order[k]];
    if (std::abs(cumulative - half) <= slack && k + 1 < order.size()) {
      return 0.5 * (values[order[k]] + values[order[k + 1]]);
    }
    if (cumulative > half) return values[order[k]];
  }
  return values[order.back()];
}

MedianResult geometric_median(const Matrix& points, const MedianOptions& options) {
  return geometric_median(points, Vector::Ones(points.rows()), options);
}

MedianResult geometric_median(const Matrix& points, const Vector& weights,
                              const MedianOptions& options) {
  const auto n = points.rows();
  const auto d = points.cols();
  if (n < 1 || d < 1) throw Error(ErrorCode::kEmpty, "geometric median needs N >= 1 and d >= 1");
  if (weights.size() != n) throw Error(ErrorCode::kDimensionMismatch, "one weight per point");
  if (!(options.tol > 0.0)) throw Error(ErrorCode::kInvalidArgument, "tol must be positive");
  if ((weights.array() <= 0.0).any()) {
    throw Error(ErrorCode::kInvalidArgument, "weights must be positive");
  }

  const Matrix pts = points.transpose();
  const Vector w = weights / weights.sum();

  // Coordinate-wise median start: inside the bounding box of the data.
  Vector y(d);
  {
    std::vector<double> column(static_cast<std::size_t>(n));
    std::vector<double> wv(w.data(), w.data() + n);
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) column[static_cast<std::size_t>(i)] = pts(j, i);
      y(j) = weighted_scalar_median(column, wv);
    }
  }
  const double spread = (pts.colwise() - y).colwise().norm().maxCoeff();
  const double coincide = kCoincidence * std::max(1.0, spread);

  MedianResult best;
  best.mu = y;
  best.mad = std::numeric_limits<double>::infinity();
  best.residual = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter <= options.max_iter; ++iter) {
    const Subgradient s = evaluate(pts, w, y, coincide);
    const double residual = residual_of(s);
    if (s.objective < best.mad || (s.objective == best.mad && residual < best.residual)) {
      best = MedianResult{y, s.objective, iter, residual};
    }
    if (residual <= options.tol) {
      return MedianResult{y, s.objective, iter, residual};
    }
    if (spread == 0.0) return MedianResult{y, 0.0, iter, 0.0};

    // A data point is the minimizer iff its own weight dominates the pull of
    // the rest. Testing the nearest sample lets the iteration land exactly on
    // a vertex optimum instead of creeping toward it.
    Eigen::Index nearest = 0;
    (pts.colwise() - y).colwise().squaredNorm().minCoeff(&nearest);
    const Vector vertex = pts.col(nearest);
    if ((vertex - y).norm() >= coincide) {
      const Subgradient at_vertex = evaluate(pts, w, vertex, coincide);
      const double vertex_residual = residual_of(at_vertex);
      if (vertex_residual <= options.tol) {
        return MedianResult{vertex, at_vertex.objective, iter + 1, vertex_residual};
      }
    }

    if (s.inv_dist_sum == 0.0) break;  // every point coincides with y
    Vector next = s.weighted_sum / s.inv_dist_sum;
    if (s.anchored > 0.0) {
      // Step off the anchor along the residual direction (Vardi-Zhang).
      const double ratio = std::min(1.0, s.anchored / s.pull.norm());
      next = (1.0 - ratio) * next + ratio * y;
    }
    if ((next - y).norm() <= 1e-17 * std::max(1.0, y.norm())) {
      // Fixed point to machine precision; no further progress is possible.
      const Subgradient fin = evaluate(pts, w, next, coincide);
      const double r = residual_of(fin);
      if (r <= std::max(options.tol, 1e3 * std::numeric_limits<double>::epsilon())) {
        return MedianResult{next, fin.objective, iter + 1, r};
      }
      break;
    }
    y = std::move(next);
  }
  throw MedianNoConverge(best);
}

double mad_about(const Matrix& points, const Vector& mu) {
  return mad_about(points, Vector::Ones(points.rows()), mu);
}

double mad_about(const Matrix& points, const Vector& weights, const Vector& mu) {
  if (points.cols() != mu.size() || points.rows() != weights.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "mad_about dimensions disagree");
  }
  const Vector dist = (points.rowwise() - mu.transpose()).rowwise().norm();
  return weights.dot(dist) / weights.sum();
}

}  // namespace pagkit
