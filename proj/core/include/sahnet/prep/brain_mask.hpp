#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sahnet/prep/intensity.hpp"
#include "sahnet/volio/volume.hpp"

namespace sahnet::prep {

/// Binary voxel mask sharing the grid of the volume it was derived from.
struct BrainMask {
  volio::Shape3 shape;
  volio::Mat4 affine;
  std::vector<std::uint8_t> grid;
  std::size_t voxel_count = 0;

  double volume_ml() const;
};

struct BrainExtractionParams {
  double tissue_low_hu = 0.0;
  double tissue_high_hu = 100.0;
  int closing_radius_vox = 2;
};

/// Threshold to the tissue window, keep the largest 6-connected component,
/// close with a ball, fill enclosed holes. The window is given in HU and
/// converted through `map` when the volume is NonNegative.
/// Throws Error(EmptyMask) when no voxel falls inside the window.
BrainMask extract_brain(const volio::Volume& v, const BrainExtractionParams& params = {},
                        const IntensityMap& map = {});

/// Keeps the largest 6-connected foreground component (ties: lowest first
/// voxel index). Returns the number of voxels kept.
std::size_t keep_largest_component(std::vector<std::uint8_t>& grid, volio::Shape3 shape);

/// Binary closing with a ball structuring element. Computed on a padded grid
/// so the border does not erode the result.
std::vector<std::uint8_t> close_ball(const std::vector<std::uint8_t>& grid,
                                     volio::Shape3 shape, int radius);

/// Sets background regions not 6-connected to the grid border.
void fill_holes(std::vector<std::uint8_t>& grid, volio::Shape3 shape);

/// Zeroes every voxel outside the mask.
volio::Volume apply_mask(const volio::Volume& v, const BrainMask& mask);

double dice(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b);

}  // namespace sahnet::prep
