#pragma once

#include <Eigen/Core>
#include <vector>

namespace mstaog {

using Scalar = double;

template <typename T> using Vector2 = Eigen::Matrix<T, 2, 1>;
template <typename T> using Vector3 = Eigen::Matrix<T, 3, 1>;
template <typename T> using Matrix2 = Eigen::Matrix<T, 2, 2>;
template <typename T> using Matrix3 = Eigen::Matrix<T, 3, 3>;
template <typename T> using Matrix23 = Eigen::Matrix<T, 2, 3>;
template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T> using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Vec2 = Vector2<Scalar>;
using Vec3 = Vector3<Scalar>;
using Mat2 = Matrix2<Scalar>;
using Mat3 = Matrix3<Scalar>;
using Mat23 = Matrix23<Scalar>;
using MatX = MatrixX<Scalar>;
using VecX = VectorX<Scalar>;

/// Integer grid location (column x, row y).
struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

}  // namespace mstaog
