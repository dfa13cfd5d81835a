#include "sahnet/prep/intensity.hpp"

#include <algorithm>

#include "sahnet/error.hpp"

namespace sahnet::prep {

void IntensityMap::validate() const {
  if (!(hu_min < hu_max)) fail(Errc::ConfigInvalid, "hu_min must be < hu_max");
  if (mode == IntensityMode::WindowStretch) {
    if (!(gain >= 1.0)) fail(Errc::ConfigInvalid, "stretch gain must be >= 1");
    if (!(window_low < window_high) || window_low < hu_min || window_high > hu_max)
      fail(Errc::ConfigInvalid, "stretch window must lie inside [hu_min, hu_max]");
  }
}

double IntensityMap::apply(double hu) const {
  const double c = std::clamp(hu, hu_min, hu_max);
  if (mode == IntensityMode::ShiftClamp) return c - hu_min;
  if (c <= window_low) return c - hu_min;
  const double base = window_low - hu_min;
  if (c <= window_high) return base + gain * (c - window_low);
  return base + gain * (window_high - window_low) + (c - window_high);
}

NonNegativeResult to_nonnegative(const volio::Volume& v, const IntensityMap& map) {
  if (v.unit() != volio::IntensityUnit::HU)
    fail(Errc::InvariantViolation, "to_nonnegative expects a HU volume");
  map.validate();
  std::size_t clamped = 0;
  std::vector<float> out(v.data().size());
  const auto in = v.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] < map.hu_min || in[i] > map.hu_max) ++clamped;
    out[i] = static_cast<float>(map.apply(in[i]));
  }
  return {v.with_data(std::move(out), volio::IntensityUnit::NonNegative), clamped};
}

}  // namespace sahnet::prep
