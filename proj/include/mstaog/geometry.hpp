#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "mstaog/core.hpp"
#include "mstaog/error.hpp"
#include "mstaog/types.hpp"

namespace mstaog {

/// 3D offset of a part relative to the root part: mean and diagonal
/// covariance (stored as the diagonal) in normalized skeleton units.
template <typename T>
struct OffsetGaussian3D {
  Vector3<T> mean = Vector3<T>::Zero();
  Vector3<T> variance = Vector3<T>::Ones();

  Matrix3<T> covariance() const { return variance.asDiagonal(); }
};

/// Scaled orthographic camera: per-axis scales (pixels per normalized unit)
/// and a rotation about the vertical axis.
template <typename T>
struct ProjectionParams {
  T k1 = 1;
  T k2 = 1;
  T theta = 0;
};

/// Offset distribution on the view plane (u to the right, v up).
template <typename T>
struct OffsetGaussian2D {
  Vector2<T> mean = Vector2<T>::Zero();
  Matrix2<T> covariance = Matrix2<T>::Identity();
};

template <typename T>
T wrap_angle(T theta) {
  constexpr T two_pi = T(2) * std::numbers::pi_v<T>;
  T r = std::fmod(theta, two_pi);
  if (r < 0) r += two_pi;
  if (r >= two_pi) r -= two_pi;
  return r;
}

template <typename T>
Matrix23<T> projection_matrix(const ProjectionParams<T>& p) {
  const T c = std::cos(p.theta), s = std::sin(p.theta);
  Matrix23<T> q;
  q << p.k1 * c, T(0), -p.k1 * s,
       T(0), p.k2, T(0);
  return q;
}

/// Floors the eigenvalues of a symmetric 2x2 matrix at `eps`.
template <typename T>
Matrix2<T> floor_eigenvalues(const Matrix2<T>& m, T eps) {
  Eigen::SelfAdjointEigenSolver<Matrix2<T>> es(m);
  Vector2<T> ev = es.eigenvalues();
  if (ev.minCoeff() >= eps) return m;
  ev = ev.cwiseMax(eps);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// Projects a 3D offset Gaussian: mean Q mu, covariance Q Sigma Q^T with the
/// eigenvalues floored at `eps`.
template <typename T>
OffsetGaussian2D<T> project_offset(const OffsetGaussian3D<T>& g,
                                   const ProjectionParams<T>& p, T eps = T(1e-6)) {
  const Matrix23<T> q = projection_matrix(p);
  OffsetGaussian2D<T> out;
  out.mean = q * g.mean;
  out.covariance = floor_eigenvalues<T>(q * g.covariance() * q.transpose(), eps);
  return out;
}

/// -(d)^T Sigma^-1 (d) with d = vi - v0 - mean. Throws NumericError when the
/// covariance is not symmetric positive definite.
template <typename T>
T deformation_score(const Vector2<T>& v0, const Vector2<T>& vi,
                    const OffsetGaussian2D<T>& g) {
  const Matrix2<T>& s = g.covariance;
  const T det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
  if (!(s(0, 0) > 0) || !(det > 0) || std::abs(s(0, 1) - s(1, 0)) > T(1e-12) * (1 + std::abs(s(0, 1))))
    throw NumericError("deformation_score: covariance is not SPD");
  const T i11 = s(1, 1) / det, i22 = s(0, 0) / det, i12 = -s(0, 1) / det;
  const Vector2<T> d = vi - v0 - g.mean;
  return -i11 * d.x() * d.x() - i22 * d.y() * d.y() - 2 * i12 * d.x() * d.y();
}

/// Least-squares scales of a scaled orthographic camera with known rotation.
/// Points are relative to a common origin (root joint / its image).
template <typename T>
ProjectionParams<T> fit_projection(std::span<const Vector3<T>> points3d,
                                   std::span<const Vector2<T>> points2d, T theta,
                                   T* residual = nullptr) {
  if (points3d.size() != points2d.size())
    throw SizeError("fit_projection: correspondence count mismatch");
  if (points3d.size() < 2)
    throw UnderdeterminedError("fit_projection: need at least two correspondences");
  const T c = std::cos(theta), s = std::sin(theta);
  T aa = 0, au = 0, yy = 0, yv = 0, scale = 0;
  for (std::size_t i = 0; i < points3d.size(); ++i) {
    const T a = c * points3d[i].x() - s * points3d[i].z();
    aa += a * a;
    au += a * points2d[i].x();
    yy += points3d[i].y() * points3d[i].y();
    yv += points3d[i].y() * points2d[i].y();
    scale += points3d[i].squaredNorm();
  }
  const T tol = T(1e-12) * std::max(scale, T(1e-300));
  if (aa <= tol || yy <= tol)
    throw UnderdeterminedError("fit_projection: no spread along a projected axis");
  ProjectionParams<T> p{au / aa, yv / yy, wrap_angle(theta)};
  if (!(p.k1 > 0) || !(p.k2 > 0))
    throw NumericError("fit_projection: non-positive scale estimate");
  if (residual) {
    const Matrix23<T> q = projection_matrix(p);
    T r = 0;
    for (std::size_t i = 0; i < points3d.size(); ++i)
      r += (q * points3d[i] - points2d[i]).squaredNorm();
    *residual = std::sqrt(r / T(points3d.size()));
  }
  return p;
}

/// Location of a part: the centroid of its joints.
template <typename T = Scalar>
Vector3<T> part_anchor(const Skeleton3D& s, const PartDefinition& part) {
  Vector3<T> c = Vector3<T>::Zero();
  for (int j : part.joints) c += s.position(j).template cast<T>();
  return c / T(part.joints.size());
}

/// Mean anchor offset of every part relative to the root part over a set of
/// normalized skeletons. Variances are initialized to sigma0^2.
template <typename T = Scalar>
std::vector<OffsetGaussian3D<T>> estimate_offsets(std::span<const Skeleton3D> skeletons,
                                                  std::span<const PartDefinition> parts,
                                                  T sigma0 = T(0.1)) {
  if (skeletons.empty()) throw DegenerateError("estimate_offsets: empty skeleton set");
  if (parts.empty()) throw ConfigError("estimate_offsets: no part definitions");
  std::vector<OffsetGaussian3D<T>> out(parts.size());
  for (auto& g : out) {
    g.mean.setZero();
    g.variance.setConstant(sigma0 * sigma0);
  }
  for (const Skeleton3D& s : skeletons) {
    const Vector3<T> root = part_anchor<T>(s, parts[0]);
    for (std::size_t k = 0; k < parts.size(); ++k)
      out[k].mean += part_anchor<T>(s, parts[k]) - root;
  }
  for (auto& g : out) g.mean /= T(skeletons.size());
  return out;
}

}  // namespace mstaog
