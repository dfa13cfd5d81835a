#include "sahnet/volio/volume.hpp"

#include <cmath>
#include <string>

#include "sahnet/error.hpp"

namespace sahnet::volio {

std::string_view to_string(IntensityUnit unit) noexcept {
  switch (unit) {
    case IntensityUnit::HU: return "HU";
    case IntensityUnit::NonNegative: return "NonNegative";
    case IntensityUnit::Normalized: return "Normalized";
  }
  return "HU";
}

bool parse_unit(std::string_view text, IntensityUnit& out) noexcept {
  for (auto u : {IntensityUnit::HU, IntensityUnit::NonNegative,
                 IntensityUnit::Normalized}) {
    if (text == to_string(u)) {
      out = u;
      return true;
    }
  }
  return false;
}

void validate(Shape3 shape, const Mat4& affine, std::size_t element_count) {
  if (shape.nx == 0 || shape.ny == 0 || shape.nz == 0)
    fail(Errc::InvariantViolation, "volume shape must be positive");
  if (element_count != shape.size())
    fail(Errc::InvariantViolation,
         "element count " + std::to_string(element_count) +
             " does not match shape product " + std::to_string(shape.size()));
  if (!has_affine_bottom_row(affine))
    fail(Errc::InvariantViolation, "affine bottom row must be (0,0,0,1)");
  if (!(std::abs(det3(affine)) > 1e-9))
    fail(Errc::InvariantViolation, "affine 3x3 block is singular");
  for (double v : affine.m)
    if (!std::isfinite(v))
      fail(Errc::InvariantViolation, "affine contains non-finite entries");
}

Volume::Volume(Shape3 shape, const Mat4& affine, IntensityUnit unit)
    : Volume(shape, affine, std::vector<float>(shape.size(), 0.0f), unit) {}

Volume::Volume(Shape3 shape, const Mat4& affine, std::vector<float> data,
               IntensityUnit unit, std::vector<std::uint8_t> extensions)
    : shape_(shape),
      affine_(affine),
      data_(std::move(data)),
      unit_(unit),
      extensions_(std::move(extensions)) {
  validate(shape_, affine_, data_.size());
}

Volume Volume::with_data(std::vector<float> data, IntensityUnit unit) const {
  return Volume(shape_, affine_, std::move(data), unit, extensions_);
}

double Volume::voxel_volume_mm3() const { return std::abs(det3(affine_)); }

}  // namespace sahnet::volio
