#pragma once

#include <vector>

#include "sahnet/tensor/tensor.hpp"
#include "sahnet/volio/volume.hpp"

namespace sahnet::net {

/// Single-channel sample [1, nz, ny, nx] (or [1, ny, nx] when spatial_dims
/// is 2, which needs nz == 1).
tensor::Tensor volume_to_sample(const volio::Volume& v, std::size_t spatial_dims = 3);

/// Stacks equally shaped samples into [N, ...].
tensor::Tensor stack(const std::vector<tensor::Tensor>& samples);

/// Sample n of a batch as its own tensor.
tensor::Tensor unstack(const tensor::Tensor& batch, std::size_t n);

/// Wraps a spatial grid (nz*ny*nx values, x fastest) as a volume on the
/// reference grid.
volio::Volume grid_to_volume(const std::vector<double>& grid, const volio::Volume& reference,
                             volio::IntensityUnit unit = volio::IntensityUnit::Normalized);

}  // namespace sahnet::net
