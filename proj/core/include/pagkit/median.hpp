#pragma once

#include <span>

#include "pagkit/model.hpp"

namespace pagkit {

// Middle order statistic; the midpoint of the two middle values for even
// counts. Throws kEmpty.
double scalar_median(std::span<const double> samples);

// Weighted median: a minimizer of sum_i w_i |x_i - mu|. When the cumulative
// weight hits exactly half at a sample, returns the midpoint of the flat
// segment (matches scalar_median for unit weights).
double weighted_scalar_median(std::span<const double> values, std::span<const double> weights);

struct MedianOptions {
  double tol = 1e-10;
  int max_iter = 10000;
};

struct MedianResult {
  Vector mu;
  double mad = 0.0;       // weighted mean distance to mu
  int iterations = 0;
  double residual = 0.0;  // norm of the minimum-norm subgradient at mu
};

// Weiszfeld did not reach the residual tolerance; carries the best iterate.
class MedianNoConverge : public Error {
 public:
  explicit MedianNoConverge(MedianResult best)
      : Error(ErrorCode::kNoConverge, "geometric median did not converge"), best_(std::move(best)) {}
  const MedianResult& best() const { return best_; }

 private:
  MedianResult best_;
};

// Geometric median of the rows of `points` (N x d).
MedianResult geometric_median(const Matrix& points, const MedianOptions& options = {});

// Weighted variant; weights must be positive and need not be normalized.
MedianResult geometric_median(const Matrix& points, const Vector& weights,
                              const MedianOptions& options = {});

// (1/N) sum ||p_i - mu|| for an arbitrary mu.
double mad_about(const Matrix& points, const Vector& mu);
double mad_about(const Matrix& points, const Vector& weights, const Vector& mu);

}  // namespace pagkit
