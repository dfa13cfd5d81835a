#include "sahnet/volio/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "sahnet/error.hpp"

namespace sahnet::volio {

Mat4 Mat4::identity() { return diagonal(1.0, 1.0, 1.0); }

Mat4 Mat4::diagonal(double sx, double sy, double sz) {
  Mat4 r;
  r(0, 0) = sx;
  r(1, 1) = sy;
  r(2, 2) = sz;
  r(3, 3) = 1.0;
  return r;
}

Mat4 Mat4::translation(double tx, double ty, double tz) {
  Mat4 r = identity();
  r(0, 3) = tx;
  r(1, 3) = ty;
  r(2, 3) = tz;
  return r;
}

Mat4 operator*(const Mat4& a, const Mat4& b) {
  Mat4 r;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
      r(i, j) = s;
    }
  return r;
}

Vec3 apply(const Mat4& a, const Vec3& p) {
  return {a(0, 0) * p[0] + a(0, 1) * p[1] + a(0, 2) * p[2] + a(0, 3),
          a(1, 0) * p[0] + a(1, 1) * p[1] + a(1, 2) * p[2] + a(1, 3),
          a(2, 0) * p[0] + a(2, 1) * p[1] + a(2, 2) * p[2] + a(2, 3)};
}

double det3(const Mat4& a) {
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

bool has_affine_bottom_row(const Mat4& a) {
  return a(3, 0) == 0.0 && a(3, 1) == 0.0 && a(3, 2) == 0.0 && a(3, 3) == 1.0;
}

Mat4 inverse_affine(const Mat4& a) {
  const double det = det3(a);
  if (!(std::abs(det) > 1e-9) || !has_affine_bottom_row(a))
    fail(Errc::SingularAffine, "affine matrix is not invertible");
  Mat4 r;
  const double inv = 1.0 / det;
  r(0, 0) = (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) * inv;
  r(0, 1) = (a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2)) * inv;
  r(0, 2) = (a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1)) * inv;
  r(1, 0) = (a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2)) * inv;
  r(1, 1) = (a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0)) * inv;
  r(1, 2) = (a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2)) * inv;
  r(2, 0) = (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0)) * inv;
  r(2, 1) = (a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1)) * inv;
  r(2, 2) = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)) * inv;
  for (std::size_t i = 0; i < 3; ++i)
    r(i, 3) = -(r(i, 0) * a(0, 3) + r(i, 1) * a(1, 3) + r(i, 2) * a(2, 3));
  r(3, 3) = 1.0;
  return r;
}

Vec3 column_norms(const Mat4& a) {
  Vec3 n{};
  for (std::size_t c = 0; c < 3; ++c)
    n[c] = std::sqrt(a(0, c) * a(0, c) + a(1, c) * a(1, c) + a(2, c) * a(2, c));
  return n;
}

double max_abs_diff(const Mat4& a, const Mat4& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < 16; ++i) d = std::max(d, std::abs(a.m[i] - b.m[i]));
  return d;
}

}  // namespace sahnet::volio
