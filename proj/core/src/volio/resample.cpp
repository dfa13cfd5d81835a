#include "sahnet/volio/resample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sahnet/error.hpp"

namespace sahnet::volio {
namespace {

// Coordinates within this distance of an integer are snapped to it so an
// identity mapping reproduces the source bit-for-bit.
constexpr double kSnap = 1e-9;

double snap(double c) {
  const double r = std::round(c);
  return std::abs(c - r) < kSnap ? r : c;
}

// Lower interpolation index and fraction along one axis; false when the
// coordinate is outside [0, n-1].
bool axis_weights(double c, std::size_t n, std::size_t& i0, double& frac) {
  if (c < 0.0 || c > static_cast<double>(n - 1)) return false;
  if (n == 1) {
    i0 = 0;
    frac = 0.0;
    return true;
  }
  auto f = static_cast<std::size_t>(std::floor(c));
  if (f >= n - 1) f = n - 2;
  i0 = f;
  frac = c - static_cast<double>(f);
  return true;
}

}  // namespace

double sample_trilinear(const Volume& v, double x, double y, double z) {
  const Shape3 s = v.shape();
  std::size_t ix, iy, iz;
  double fx, fy, fz;
  if (!axis_weights(x, s.nx, ix, fx) || !axis_weights(y, s.ny, iy, fy) ||
      !axis_weights(z, s.nz, iz, fz))
    return 0.0;
  const std::size_t jx = s.nx > 1 ? ix + 1 : ix;
  const std::size_t jy = s.ny > 1 ? iy + 1 : iy;
  const std::size_t jz = s.nz > 1 ? iz + 1 : iz;
  const double c000 = v.at(ix, iy, iz), c100 = v.at(jx, iy, iz);
  const double c010 = v.at(ix, jy, iz), c110 = v.at(jx, jy, iz);
  const double c001 = v.at(ix, iy, jz), c101 = v.at(jx, iy, jz);
  const double c011 = v.at(ix, jy, jz), c111 = v.at(jx, jy, jz);
  const double c00 = c000 + fx * (c100 - c000);
  const double c10 = c010 + fx * (c110 - c010);
  const double c01 = c001 + fx * (c101 - c001);
  const double c11 = c011 + fx * (c111 - c011);
  const double c0 = c00 + fy * (c10 - c00);
  const double c1 = c01 + fy * (c11 - c01);
  return c0 + fz * (c1 - c0);
}

Volume resample_mapped(const Volume& v, const Mat4& voxel_to_source_world,
                       const Mat4& out_affine, Shape3 target_shape, Interp interp,
                       float fill) {
  if (target_shape.size() == 0)
    fail(Errc::InvariantViolation, "target shape must be positive");
  const Mat4 to_source = inverse_affine(v.affine()) * voxel_to_source_world;
  const Shape3 s = v.shape();
  std::vector<float> out(target_shape.size(), fill);
  std::size_t idx = 0;
  for (std::size_t z = 0; z < target_shape.nz; ++z)
    for (std::size_t y = 0; y < target_shape.ny; ++y)
      for (std::size_t x = 0; x < target_shape.nx; ++x, ++idx) {
        const Vec3 p = apply(to_source, {static_cast<double>(x),
                                         static_cast<double>(y),
                                         static_cast<double>(z)});
        const double cx = snap(p[0]), cy = snap(p[1]), cz = snap(p[2]);
        if (interp == Interp::Nearest) {
          const double rx = std::floor(cx + 0.5), ry = std::floor(cy + 0.5),
                       rz = std::floor(cz + 0.5);
          if (rx < 0 || ry < 0 || rz < 0 || rx >= static_cast<double>(s.nx) ||
              ry >= static_cast<double>(s.ny) || rz >= static_cast<double>(s.nz))
            continue;
          out[idx] = v.at(static_cast<std::size_t>(rx), static_cast<std::size_t>(ry),
                          static_cast<std::size_t>(rz));
        } else {
          if (cx < 0.0 || cy < 0.0 || cz < 0.0 || cx > double(s.nx - 1) ||
              cy > double(s.ny - 1) || cz > double(s.nz - 1))
            continue;
          out[idx] = static_cast<float>(sample_trilinear(v, cx, cy, cz));
        }
      }
  return Volume(target_shape, out_affine, std::move(out), v.unit());
}

Volume resample(const Volume& v, const Mat4& target_affine, Shape3 target_shape,
                Interp interp, float fill) {
  inverse_affine(target_affine);  // SingularAffine check
  if (target_shape == v.shape() && target_affine == v.affine())
    return Volume(v.shape(), v.affine(), std::vector<float>(v.data().begin(), v.data().end()),
                  v.unit());
  return resample_mapped(v, target_affine, target_affine, target_shape, interp, fill);
}

bool is_axis_aligned(const Mat4& a, double tol) {
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      if (r == c) {
        if (!(a(r, c) > 0.0)) return false;
      } else if (std::abs(a(r, c)) > tol) {
        return false;
      }
    }
  return true;
}

Grid axis_aligned_grid(const Volume& v) {
  const Shape3 s = v.shape();
  const Vec3 spacing = column_norms(v.affine());
  Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
          std::numeric_limits<double>::max()};
  Vec3 hi{-lo[0], -lo[1], -lo[2]};
  for (int cx = 0; cx < 2; ++cx)
    for (int cy = 0; cy < 2; ++cy)
      for (int cz = 0; cz < 2; ++cz) {
        const Vec3 p = apply(v.affine(), {cx ? double(s.nx - 1) : 0.0,
                                          cy ? double(s.ny - 1) : 0.0,
                                          cz ? double(s.nz - 1) : 0.0});
        for (std::size_t k = 0; k < 3; ++k) {
          lo[k] = std::min(lo[k], p[k]);
          hi[k] = std::max(hi[k], p[k]);
        }
      }
  Grid g;
  g.affine = Mat4::diagonal(spacing[0], spacing[1], spacing[2]);
  std::array<std::size_t, 3> n{};
  for (std::size_t k = 0; k < 3; ++k) {
    g.affine(k, 3) = lo[k];
    n[k] = static_cast<std::size_t>(std::floor((hi[k] - lo[k]) / spacing[k] + 1e-6)) + 1;
  }
  g.shape = {n[0], n[1], n[2]};
  return g;
}

}  // namespace sahnet::volio
