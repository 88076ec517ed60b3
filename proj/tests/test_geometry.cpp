#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mstaog/geometry.hpp"
#include "support.hpp"

using namespace mstaog;
constexpr Scalar pi = std::numbers::pi;

TEST_CASE("projection_matrix examples") {
  Mat23 e0;
  e0 << 1, 0, 0, 0, 1, 0;
  CHECK((projection_matrix<Scalar>({1, 1, 0}) - e0).norm() < 1e-15);
  Mat23 e1;
  e1 << 0, 0, -1, 0, 1, 0;
  CHECK((projection_matrix<Scalar>({1, 1, pi / 2}) - e1).norm() < 1e-15);
  Mat23 e2;
  e2 << std::sqrt(2.0), 0, -std::sqrt(2.0), 0, 3, 0;
  CHECK((projection_matrix<Scalar>({2, 3, pi / 4}) - e2).norm() < 1e-14);
}

TEST_CASE("project_offset examples") {
  OffsetGaussian3D<Scalar> g;
  g.mean = Vec3(1, 2, 3);
  g.variance = Vec3(4, 9, 16);
  const auto a = project_offset(g, ProjectionParams<Scalar>{1, 1, 0});
  CHECK((a.mean - Vec2(1, 2)).norm() < 1e-15);
  CHECK((a.covariance - Vec2(4, 9).asDiagonal().toDenseMatrix()).norm() < 1e-14);
  const auto b = project_offset(g, ProjectionParams<Scalar>{1, 1, pi / 2});
  CHECK((b.mean - Vec2(-3, 2)).norm() < 1e-14);
  CHECK((b.covariance - Vec2(16, 9).asDiagonal().toDenseMatrix()).norm() < 1e-13);
}

TEST_CASE("project_offset covariance matches projected samples") {
  OffsetGaussian3D<Scalar> g;
  g.mean = Vec3(0.3, -0.2, 0.5);
  g.variance = Vec3(1, 1, 4);
  const ProjectionParams<Scalar> p{2, 1, pi / 4};
  const auto out = project_offset(g, p);
  const Mat23 q = projection_matrix(p);
  std::mt19937_64 rng(11);
  std::normal_distribution<Scalar> n(0, 1);
  const int draws = 1000000;
  Vec2 mean = Vec2::Zero();
  Mat2 second = Mat2::Zero();
  for (int i = 0; i < draws; ++i) {
    const Vec3 x = g.mean + g.variance.cwiseSqrt().cwiseProduct(Vec3(n(rng), n(rng), n(rng)));
    const Vec2 y = q * x;
    mean += y;
    second += y * y.transpose();
  }
  mean /= draws;
  const Mat2 cov = second / draws - mean * mean.transpose();
  CHECK((cov - out.covariance).norm() / out.covariance.norm() < 0.02);
  CHECK((mean - out.mean).norm() < 0.01);
}

TEST_CASE("projected covariance is floored to stay positive definite") {
  OffsetGaussian3D<Scalar> g;
  g.variance = Vec3(1e-20, 1, 1e-20);
  const auto out = project_offset(g, ProjectionParams<Scalar>{1, 1, 0.3}, 1e-6);
  Eigen::SelfAdjointEigenSolver<Mat2> es(out.covariance);
  CHECK(es.eigenvalues().minCoeff() >= 1e-6 * (1 - 1e-12));
}

TEST_CASE("deformation_score examples") {
  OffsetGaussian2D<Scalar> g;
  g.mean = Vec2(1, -2);
  CHECK(deformation_score<Scalar>(Vec2(3, 3), Vec2(4, 1), g) == 0);
  g.mean.setZero();
  CHECK(deformation_score<Scalar>(Vec2(0, 0), Vec2(1, 0), g) == doctest::Approx(-1));
  g.covariance << 2, 1, 1, 2;
  CHECK(deformation_score<Scalar>(Vec2(0, 0), Vec2(1, 1), g) == doctest::Approx(-2.0 / 3));
  g.covariance << 1, 2, 2, 1;
  CHECK_THROWS_AS(deformation_score<Scalar>(Vec2(0, 0), Vec2(1, 1), g), NumericError);
}

TEST_CASE("deformation_score is the negative Mahalanobis form") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<Scalar> u(-2, 2);
  for (int i = 0; i < 50; ++i) {
    Mat2 a;
    a << u(rng), u(rng), u(rng), u(rng);
    OffsetGaussian2D<Scalar> g;
    g.covariance = a * a.transpose() + Mat2::Identity() * 0.1;
    g.mean = Vec2(u(rng), u(rng));
    const Vec2 v0(u(rng), u(rng)), vi(u(rng), u(rng));
    const Vec2 d = vi - v0 - g.mean;
    const Scalar expected = -d.dot(g.covariance.inverse() * d);
    CHECK(deformation_score(v0, vi, g) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(deformation_score(v0, vi, g) <= 0);
  }
}

TEST_CASE("fit_projection recovers noiseless scales") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<Scalar> u(-1, 1);
  const ProjectionParams<Scalar> truth{1.5, 2.0, 0.3};
  const Mat23 q = projection_matrix(truth);
  std::vector<Vec3> p3;
  std::vector<Vec2> p2;
  for (int i = 0; i < 10; ++i) {
    p3.emplace_back(u(rng), u(rng), u(rng));
    p2.push_back(q * p3.back());
  }
  Scalar residual = -1;
  const auto fit = fit_projection<Scalar>(p3, p2, 0.3, &residual);
  CHECK(std::abs(fit.k1 - 1.5) < 1e-6);
  CHECK(std::abs(fit.k2 - 2.0) < 1e-6);
  CHECK(fit.theta == doctest::Approx(0.3));
  CHECK(residual < 1e-9);
}

TEST_CASE("fit_projection: two-equation solve and rank deficiency") {
  const std::vector<Vec3> p3{Vec3(1, 0, 0), Vec3(0, 1, 0)};
  const std::vector<Vec2> p2{Vec2(2, 0), Vec2(0, 3)};
  const auto fit = fit_projection<Scalar>(p3, p2, 0);
  CHECK(fit.k1 == doctest::Approx(2));
  CHECK(fit.k2 == doctest::Approx(3));

  const std::vector<Vec3> z_only{Vec3(0, 1, 1), Vec3(0, -1, 2)};
  const std::vector<Vec2> any{Vec2(0, 1), Vec2(0, -1)};
  CHECK_THROWS_AS(fit_projection<Scalar>(z_only, any, 0), UnderdeterminedError);
  CHECK_THROWS_AS(fit_projection<Scalar>(std::span(p3).first(1), std::span(p2).first(1), 0),
                  UnderdeterminedError);
  CHECK_THROWS_AS(fit_projection<Scalar>(p3, std::span(p2).first(1), 0), SizeError);
}

TEST_CASE("wrap_angle maps into [0, 2pi)") {
  CHECK(wrap_angle(-0.5) == doctest::Approx(2 * pi - 0.5));
  CHECK(wrap_angle(2 * pi) == 0);
  CHECK(wrap_angle(7 * pi) == doctest::Approx(pi));
}

namespace {

const std::vector<PartDefinition>& parts() { return default_parts(); }

}  // namespace

TEST_CASE("estimate_offsets: a single skeleton gives its own offsets") {
  std::mt19937_64 rng(14);
  const Skeleton3D s = testing::random_skeleton(rng);
  const auto g = estimate_offsets<Scalar>(std::vector<Skeleton3D>{s}, parts(), 0.2);
  REQUIRE(g.size() == parts().size());
  const Vec3 root = part_anchor(s, parts()[0]);
  for (std::size_t k = 0; k < g.size(); ++k) {
    CHECK((g[k].mean - (part_anchor(s, parts()[k]) - root)).norm() < 1e-15);
    CHECK((g[k].variance - Vec3::Constant(0.04)).norm() < 1e-15);
  }
  CHECK(g[0].mean.norm() == 0);
}

TEST_CASE("estimate_offsets: mirrored pair has zero x offsets") {
  std::mt19937_64 rng(15);
  const Skeleton3D a = testing::random_skeleton(rng);
  Skeleton3D b = a;
  for (auto& j : b.joints) j.position.x() = -j.position.x();
  const auto g = estimate_offsets<Scalar>(std::vector<Skeleton3D>{a, b}, parts());
  for (const auto& o : g) CHECK(std::abs(o.mean.x()) < 1e-15);
}

TEST_CASE("estimate_offsets: sample mean converges to planted offsets") {
  std::mt19937_64 rng(16);
  std::normal_distribution<Scalar> n(0, 1);
  const Skeleton3D base = testing::random_skeleton(rng);
  const Scalar sigma = 0.05;
  std::vector<Skeleton3D> set;
  for (int i = 0; i < 100; ++i) {
    Skeleton3D s = base;
    for (auto& j : s.joints) j.position += sigma * Vec3(n(rng), n(rng), n(rng));
    set.push_back(s);
  }
  const auto g = estimate_offsets<Scalar>(set, parts());
  const Vec3 root = part_anchor(base, parts()[0]);
  for (std::size_t k = 1; k < g.size(); ++k) {
    const Vec3 truth = part_anchor(base, parts()[k]) - root;
    // Anchor offsets average joint noise, so sigma bounds their spread.
    CHECK((g[k].mean - truth).cwiseAbs().maxCoeff() < 3 * sigma * std::sqrt(2.0) / std::sqrt(100.0));
  }
  CHECK_THROWS_AS(estimate_offsets<Scalar>(std::vector<Skeleton3D>{}, parts()), DegenerateError);
}
