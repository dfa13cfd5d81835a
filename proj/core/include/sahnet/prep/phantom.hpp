#pragma once

#include <cstdint>

#include "sahnet/volio/volume.hpp"

namespace sahnet::prep {

/// Head-CT-like phantom in HU: air background, a bone shell, brain tissue
/// with gentle low-frequency texture, and two CSF ventricles. Geometry is
/// expressed as fractions of the grid so any shape works.
struct HeadPhantomParams {
  volio::Shape3 shape{32, 32, 32};
  double spacing_mm = 4.0;
  double brain_hu = 35.0;
  double csf_hu = 5.0;
  double bone_hu = 800.0;
  double air_hu = -1000.0;
  double shell_vox = 2.0;
  double texture_hu = 4.0;
  double noise_hu = 0.0;
  std::uint64_t seed = 0;
};

volio::Volume head_phantom(const HeadPhantomParams& params = {});

/// Desk-scale registration template: ellipsoidal brain in [0,1] on a
/// 64x76x64 grid at 3 mm (or any requested grid).
volio::Volume brain_template(volio::Shape3 shape = {64, 76, 64}, double spacing_mm = 3.0);

/// Smooth asymmetric test pattern (sum of anisotropic Gaussians) used to
/// exercise registration.
volio::Volume smooth_blobs(volio::Shape3 shape, double spacing_mm = 1.0);

}  // namespace sahnet::prep
