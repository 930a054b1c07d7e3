#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "pagkit/median.hpp"

using namespace pagkit;

namespace {

Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

Matrix random_cloud(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix pts(n, d);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = normal(rng);
  return pts;
}

}  // namespace

TEST_CASE("scalar_median examples") {
  const std::vector<double> odd{1, 2, 10};
  const std::vector<double> even{1, 2, 3, 4};
  CHECK(scalar_median(odd) == 2.0);
  CHECK(scalar_median(even) == 2.5);

  std::vector<double> lag(4096);
  for (std::size_t k = 0; k < lag.size(); ++k) {
    const double t = 2.0 * static_cast<double>(k) / 4096.0;
    lag[k] = std::exp(-t) / (1.0 - std::exp(-2.0));
  }
  CHECK(std::abs(scalar_median(lag) - std::exp(-1.0) / (1.0 - std::exp(-2.0))) < 1e-3);
  CHECK(std::abs(scalar_median(lag) - 0.42546) < 1e-3);

  try {
    scalar_median(std::vector<double>{});
    FAIL("expected empty");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmpty);
  }
}

TEST_CASE("weighted_scalar_median") {
  const std::vector<double> v{1, 2, 3, 4};
  const std::vector<double> unit{1, 1, 1, 1};
  CHECK(weighted_scalar_median(v, unit) == 2.5);
  const std::vector<double> heavy{1, 1, 1, 10};
  CHECK(weighted_scalar_median(v, heavy) == 4.0);
}

TEST_CASE("geometric_median examples") {
  Matrix same(5, 3);
  same.rowwise() = Eigen::RowVector3d(1.0, -2.0, 0.5);
  auto r = geometric_median(same);
  CHECK((r.mu - Eigen::Vector3d(1.0, -2.0, 0.5)).norm() < 1e-12);
  CHECK(r.mad == 0.0);

  Matrix tri(3, 2);
  for (int i = 0; i < 3; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 3.0 + 0.3;
    tri.row(i) << std::cos(a), std::sin(a);
  }
  r = geometric_median(tri);
  CHECK(r.mu.norm() < 1e-9);
  CHECK(r.residual < 1e-10);
  CHECK(r.mad == doctest::Approx(1.0).epsilon(1e-9));

  r = geometric_median(column({1, 2, 10}));
  CHECK(r.mu(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.mad == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("mad_about examples") {
  Matrix one(1, 2);
  one << 0.3, 0.4;
  CHECK(mad_about(one, Eigen::Vector2d(0.3, 0.4)) == 0.0);
  const Matrix data = column({1, 2, 10});
  Vector mu(1);
  mu << 3.0;
  CHECK(mad_about(data, mu) == doctest::Approx(10.0 / 3.0));
  CHECK(mad_about(data, mu) > geometric_median(data).mad);
}

TEST_CASE("geometric median is a local minimiser of the mean distance") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index d = 1 + trial % 4;
    const Matrix pts = random_cloud(rng, 50 + 7 * trial, d);
    const auto r = geometric_median(pts);
    CHECK(r.residual <= 1e-10);
    CHECK(r.mad >= 0.0);
    const double spread = (pts.colwise().maxCoeff() - pts.colwise().minCoeff()).maxCoeff();
    for (int k = 0; k < 100; ++k) {
      Vector delta(d);
      for (Eigen::Index i = 0; i < d; ++i) delta(i) = normal(rng);
      delta *= 1e-3 * spread / delta.norm();
      CHECK(mad_about(pts, r.mu) <= mad_about(pts, r.mu + delta) + 1e-9);
    }
  }
}

TEST_CASE("geometric median is translation and scale equivariant") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index d = 2 + trial % 3;
    const Matrix pts = random_cloud(rng, 41, d);
    const auto base = geometric_median(pts);
    const Vector c = Vector::LinSpaced(d, -3.0, 5.0);
    const auto moved = geometric_median(pts.rowwise() + c.transpose());
    CHECK((moved.mu - (base.mu + c)).norm() < 1e-7);
    CHECK(moved.mad == doctest::Approx(base.mad).epsilon(1e-8));
    for (double alpha : {-2.5, 0.01, 7.0}) {
      const auto scaled = geometric_median(alpha * pts);
      CHECK((scaled.mu - alpha * base.mu).norm() < 1e-7 * std::abs(alpha));
      CHECK(scaled.mad == doctest::Approx(std::abs(alpha) * base.mad).epsilon(1e-8));
    }
  }
}

TEST_CASE("one-dimensional geometric median matches the scalar median") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix pts = random_cloud(rng, 2 * (5 + trial) + 1, 1);
    const std::vector<double> v(pts.data(), pts.data() + pts.size());
    CHECK(geometric_median(pts).mu(0) == doctest::Approx(scalar_median(v)).epsilon(1e-10));
  }
}

TEST_CASE("collinear clouds and weights") {
  Matrix line(5, 2);
  for (int i = 0; i < 5; ++i) line.row(i) << i, 2.0 * i;
  const auto r = geometric_median(line);
  CHECK((r.mu - Eigen::Vector2d(2.0, 4.0)).norm() < 1e-9);

  Vector w = Vector::Ones(5);
  w(4) = 100.0;
  const auto rw = geometric_median(line, w);
  CHECK((rw.mu - Eigen::Vector2d(4.0, 8.0)).norm() < 1e-9);
}

TEST_CASE("iteration cap raises no-converge with the best iterate") {
  std::mt19937_64 rng(31);
  const Matrix pts = random_cloud(rng, 200, 3);
  try {
    geometric_median(pts, MedianOptions{1e-15, 2});
    FAIL("expected no-converge");
  } catch (const MedianNoConverge& e) {
    CHECK(e.code() == ErrorCode::kNoConverge);
    CHECK(e.best().mu.size() == 3);
    CHECK(e.best().mad > 0.0);
  }
}
