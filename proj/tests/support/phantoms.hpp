#pragma once
// Preprocessing phantoms shared by the unit suite and the acceptance binary.

#include <cmath>
#include <numbers>
#include <vector>

#include "sahnet/prep/brain_mask.hpp"
#include "sahnet/prep/intensity.hpp"
#include "sahnet/prep/phantom.hpp"
#include "sahnet/prep/registration.hpp"
#include "sahnet/volio/resample.hpp"

namespace sahnet::testing {

// moving(q) = fixed(T^-1 q), so registration should recover T.
inline volio::Volume warp(const volio::Volume& fixed, const volio::Mat4& t) {
  return volio::resample_mapped(fixed, volio::inverse_affine(t) * fixed.affine(), fixed.affine(), fixed.shape());
}

struct SpherePhantom {
  volio::Volume volume;
  std::vector<std::uint8_t> truth;
};

// Brain sphere inside a bone shell in air.
inline SpherePhantom sphere_phantom(std::size_t n, double radius, double shell) {
  std::vector<float> d(n * n * n);
  std::vector<std::uint8_t> truth(d.size());
  const double c = (double(n) - 1) / 2;
  std::size_t i = 0;
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x, ++i) {
        const double r = std::sqrt((x - c) * (x - c) + (y - c) * (y - c) + (z - c) * (z - c));
        if (r <= radius) {
          d[i] = 35.0f + 3.0f * float(std::sin(0.7 * x) * std::cos(0.5 * y));
          truth[i] = 1;
        } else if (r <= radius + shell) {
          d[i] = 900.0f;
        } else {
          d[i] = -1000.0f;
        }
      }
  return {volio::Volume(volio::Shape3{n, n, n}, volio::Mat4::diagonal(1, 1, 1), d), truth};
}

inline double overlap(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  double inter = 0, sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    sa += a[i] != 0;
    sb += b[i] != 0;
  }
  return 2 * inter / (sa + sb);
}

inline double sphere_dice() {
  const auto p = sphere_phantom(40, 12.0, 3.0);
  return overlap(prep::extract_brain(p.volume).grid, p.truth);
}

/// Largest per-axis error, in voxels, recovering a (3, -2, 1) voxel shift at
/// 2 mm spacing.
inline double translation_error_vox() {
  const auto fixed = prep::smooth_blobs(volio::Shape3{32, 32, 32}, 2.0);
  const auto moving = warp(fixed, volio::Mat4::translation(3 * 2.0, -2 * 2.0, 1 * 2.0));
  prep::RegistrationOptions o;
  o.kind = prep::TransformKind::Rigid;
  const auto r = prep::register_affine(moving, fixed, o);
  const double err[3] = {r.transform.matrix(0, 3) / 2 - 3, r.transform.matrix(1, 3) / 2 + 2,
                         r.transform.matrix(2, 3) / 2 - 1};
  return std::max({std::abs(err[0]), std::abs(err[1]), std::abs(err[2])});
}

/// Error in degrees recovering a 5 degree axial rotation.
inline double rotation_error_deg() {
  const auto fixed = prep::smooth_blobs(volio::Shape3{32, 32, 32}, 2.0);
  const double angle = 5.0 * std::numbers::pi / 180;
  const auto moving = warp(fixed, prep::euler_rotation(0, 0, angle));
  const auto r = prep::register_affine(moving, fixed, {});
  const double got = std::atan2(r.transform.matrix(1, 0), r.transform.matrix(0, 0));
  return std::abs(got - angle) * 180 / std::numbers::pi;
}

/// True when the map is strictly increasing, non-negative and zero at
/// -1024 on every integer HU in [-1024, 3071].
inline bool intensity_sweep_ok(const prep::IntensityMap& m) {
  if (m.apply(-1024) != 0.0) return false;
  double prev = -1;
  for (int hu = -1024; hu <= 3071; ++hu) {
    const double v = m.apply(hu);
    if (!(v >= 0.0 && v > prev)) return false;
    prev = v;
  }
  return true;
}

}  // namespace sahnet::testing
