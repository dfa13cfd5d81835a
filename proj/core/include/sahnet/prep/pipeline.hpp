#pragma once

#include <string>

#include "sahnet/prep/brain_mask.hpp"
#include "sahnet/prep/intensity.hpp"
#include "sahnet/prep/registration.hpp"
#include "sahnet/volio/volume.hpp"

namespace sahnet::prep {

struct PipelineOptions {
  IntensityMap intensity;
  BrainExtractionParams brain;
  RegistrationOptions registration;
  double percentile_low = 0.5;
  double percentile_high = 99.5;
};

/// Per-subject quality-control record.
struct QcRecord {
  bool resampled_to_axis_aligned = false;
  std::string intensity_mode;
  std::size_t clamped_voxels = 0;
  double mask_volume_ml = 0.0;
  double registration_initial_mse = 0.0;
  double registration_mse = 0.0;
  int registration_iterations = 0;
  bool registration_converged = false;
  double window_low = 0.0;
  double window_high = 0.0;
};

struct PipelineResult {
  volio::Volume output;        // template grid, unit Normalized, values in [0,1]
  BrainMask registered_mask;   // brain mask carried onto the template grid
  AffineTransform transform;
  QcRecord qc;
};

/// Axis-aligned resample -> to_nonnegative -> extract_brain (background
/// zeroed) -> percentile rescale of brain voxels to [0,1] -> register to
/// `template_volume` -> output on the template grid, restricted to the
/// registered mask. Errors are rethrown with the stage name attached.
PipelineResult run_pipeline(const volio::Volume& hu, const volio::Volume& template_volume,
                            const PipelineOptions& options = {});

/// Linear-interpolated percentile (0-100) of the given values.
double percentile(std::vector<float> values, double pct);

}  // namespace sahnet::prep
