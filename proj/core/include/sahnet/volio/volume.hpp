#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "sahnet/volio/matrix.hpp"

namespace sahnet::volio {

enum class IntensityUnit { HU, NonNegative, Normalized };

std::string_view to_string(IntensityUnit unit) noexcept;
/// Parses the names produced by to_string; returns false on no match.
bool parse_unit(std::string_view text, IntensityUnit& out) noexcept;

struct Shape3 {
  std::size_t nx = 1;
  std::size_t ny = 1;
  std::size_t nz = 1;

  std::size_t size() const noexcept { return nx * ny * nz; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// Immutable 3D scalar grid (x fastest) with a voxel-index -> world-mm affine.
/// A 2D image is a volume with nz == 1.
class Volume {
 public:
  Volume(Shape3 shape, const Mat4& affine,
         IntensityUnit unit = IntensityUnit::HU);
  Volume(Shape3 shape, const Mat4& affine, std::vector<float> data,
         IntensityUnit unit = IntensityUnit::HU,
         std::vector<std::uint8_t> extensions = {});

  const Shape3& shape() const noexcept { return shape_; }
  const Mat4& affine() const noexcept { return affine_; }
  IntensityUnit unit() const noexcept { return unit_; }
  std::span<const float> data() const noexcept { return data_; }
  /// Opaque NIfTI extension bytes (everything between byte 352 and the
  /// payload) preserved from a read, empty otherwise.
  std::span<const std::uint8_t> extensions() const noexcept {
    return extensions_;
  }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return x + shape_.nx * (y + shape_.ny * z);
  }
  float at(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return data_[index(x, y, z)];
  }

  Volume with_data(std::vector<float> data, IntensityUnit unit) const;
  Volume with_data(std::vector<float> data) const {
    return with_data(std::move(data), unit_);
  }

  /// Voxel volume in mm^3 (|det| of the 3x3 block).
  double voxel_volume_mm3() const;

 private:
  Shape3 shape_;
  Mat4 affine_;
  std::vector<float> data_;
  IntensityUnit unit_;
  std::vector<std::uint8_t> extensions_;
};

/// Checks the Volume invariants, throwing Error(InvariantViolation).
void validate(Shape3 shape, const Mat4& affine, std::size_t element_count);

}  // namespace sahnet::volio
