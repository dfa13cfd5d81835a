#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace sahnet::train {

/// Dense scalar grid, x fastest.
struct Grid3 {
  std::size_t nx = 1, ny = 1, nz = 1;
  std::vector<double> values;

  std::size_t size() const noexcept { return nx * ny * nz; }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept { return x + nx * (y + ny * z); }
};

struct ElasticConfig {
  bool enabled = false;
  double alpha = 2.0;  // max displacement, voxels
  double sigma = 4.0;  // Gaussian smoothing, voxels
};

struct AugConfig {
  /// x (left-right, across the vertical midline), y, z.
  std::array<bool, 3> mirror_axes{true, false, false};
  double mirror_probability = 0.5;
  double rotation_deg = 15.0;  // about the axial (z) axis, uniform in +-range
  double scale_min = 0.9;
  double scale_max = 1.1;
  ElasticConfig elastic;

  /// Every augmentation switched off.
  static AugConfig none();
  void validate() const;
};

/// Reverses one axis (0 = x, 1 = y, 2 = z).
Grid3 mirror(const Grid3& g, std::size_t axis);

/// Three components (dx, dy, dz) per voxel, voxel-major. Uniform noise in
/// [-1, 1] per component, Gaussian-smoothed with reflected borders, then
/// scaled so the largest displacement magnitude equals alpha.
std::vector<double> elastic_field(std::size_t nx, std::size_t ny, std::size_t nz, double alpha, double sigma,
                                  std::uint64_t seed);

/// Mirror, rotation, scale, elastic in that order, with every parameter drawn
/// from a generator seeded only by `seed`. Trilinear sampling, zero outside.
Grid3 augment_sample(const Grid3& g, std::uint64_t seed, const AugConfig& config);

}  // namespace sahnet::train
