#pragma once

#include <array>
#include <cstddef>

namespace sahnet::volio {

using Vec3 = std::array<double, 3>;

/// Row-major 4x4 matrix used for voxel<->world and world<->world affines.
struct Mat4 {
  std::array<double, 16> m{};

  static Mat4 identity();
  static Mat4 diagonal(double sx, double sy, double sz);
  static Mat4 translation(double tx, double ty, double tz);

  double& operator()(std::size_t r, std::size_t c) { return m[r * 4 + c]; }
  double operator()(std::size_t r, std::size_t c) const { return m[r * 4 + c]; }

  friend bool operator==(const Mat4&, const Mat4&) = default;
};

Mat4 operator*(const Mat4& a, const Mat4& b);

/// Applies the affine part to a point (homogeneous w = 1).
Vec3 apply(const Mat4& a, const Vec3& p);

/// Determinant of the upper-left 3x3 block.
double det3(const Mat4& a);

bool has_affine_bottom_row(const Mat4& a);

/// Inverse of an affine matrix; throws Error(SingularAffine) when
/// |det3| <= 1e-9.
Mat4 inverse_affine(const Mat4& a);

/// Column norms of the 3x3 block (voxel spacing in mm).
Vec3 column_norms(const Mat4& a);

double max_abs_diff(const Mat4& a, const Mat4& b);

}  // namespace sahnet::volio
