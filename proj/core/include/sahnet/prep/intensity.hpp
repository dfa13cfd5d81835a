#pragma once

#include <cstddef>

#include "sahnet/volio/volume.hpp"

namespace sahnet::prep {

enum class IntensityMode { ShiftClamp, WindowStretch };

/// Monotone HU -> non-negative map. ShiftClamp is `clamp(hu) - hu_min`;
/// WindowStretch additionally multiplies slopes inside the stretch window by
/// `gain`, offsetting the upper segment so the map stays continuous.
struct IntensityMap {
  IntensityMode mode = IntensityMode::ShiftClamp;
  double hu_min = -1024.0;
  double hu_max = 3071.0;
  double window_low = 0.0;
  double window_high = 100.0;
  double gain = 1.0;

  /// Throws Error(ConfigInvalid) when hu_min >= hu_max, gain < 1, or the
  /// window is empty or outside [hu_min, hu_max].
  void validate() const;
  double apply(double hu) const;
  double max_output() const { return apply(hu_max); }
};

struct NonNegativeResult {
  volio::Volume volume;
  std::size_t clamped_voxels = 0;
};

/// Requires v.unit() == HU; the result is tagged NonNegative.
NonNegativeResult to_nonnegative(const volio::Volume& v, const IntensityMap& map);

}  // namespace sahnet::prep
