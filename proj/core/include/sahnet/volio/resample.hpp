#pragma once

#include "sahnet/volio/volume.hpp"

namespace sahnet::volio {

enum class Interp { Nearest, Trilinear };

/// Resamples `v` onto the grid (target_affine, target_shape). Each target
/// voxel centre goes to world mm through target_affine and back to source
/// voxel coordinates through inverse(v.affine()). Samples outside the source
/// grid take `fill` (0 unless stated).
Volume resample(const Volume& v, const Mat4& target_affine, Shape3 target_shape,
                Interp interp = Interp::Trilinear, float fill = 0.0f);

/// Resamples through an explicit target-voxel -> source-world mapping and
/// labels the result with `out_affine`. Used for registration, where the
/// mapping is transform * fixed.affine().
Volume resample_mapped(const Volume& v, const Mat4& voxel_to_source_world,
                       const Mat4& out_affine, Shape3 target_shape,
                       Interp interp = Interp::Trilinear, float fill = 0.0f);

/// Trilinear sample at continuous voxel coordinates; 0 outside the grid.
double sample_trilinear(const Volume& v, double x, double y, double z);

/// Axis-aligned grid (diagonal affine, positive spacing) covering the world
/// bounding box of `v`, with spacing equal to v's column norms.
struct Grid {
  Mat4 affine;
  Shape3 shape;
};
Grid axis_aligned_grid(const Volume& v);

/// True when the 3x3 block is diagonal with positive entries.
bool is_axis_aligned(const Mat4& affine, double tol = 1e-6);

}  // namespace sahnet::volio
