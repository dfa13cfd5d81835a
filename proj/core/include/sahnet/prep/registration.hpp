#pragma once

#include <vector>

#include "sahnet/volio/volume.hpp"

namespace sahnet::prep {

enum class TransformKind { Identity, Rigid, Affine };

/// World-mm -> world-mm map taking fixed-space points to moving-space points.
struct AffineTransform {
  volio::Mat4 matrix = volio::Mat4::identity();
  TransformKind kind = TransformKind::Identity;

  /// Bottom row check, plus orthonormality and det +1 for Rigid.
  bool valid(double tol = 1e-6) const;
};

struct RegistrationOptions {
  int levels = 3;  // pyramid factors 4, 2, 1 (the last `levels` of them)
  int iters_per_level = 100;
  /// Initial step in mm at each level; 0 selects the level's voxel spacing.
  double step_mm = 0.0;
  double min_step_mm = 1e-3;
  TransformKind kind = TransformKind::Rigid;
};

struct RegistrationDiagnostics {
  double initial_mse = 0.0;
  double final_mse = 0.0;
  int iterations = 0;
  std::vector<int> iterations_per_level;
  /// Objective after every accepted iterate at the finest level.
  std::vector<double> accepted_objective;
  bool converged = false;
};

struct RegistrationResult {
  AffineTransform transform;
  volio::Volume registered;  // moving resampled onto the fixed grid
  RegistrationDiagnostics diagnostics;
};

/// Gradient descent on mean squared intensity error over a coarse-to-fine
/// pyramid. The best iterate is always returned; non-convergence shows up
/// in the diagnostics. Throws Error(DegenerateInput) for constant volumes.
RegistrationResult register_affine(const volio::Volume& moving, const volio::Volume& fixed,
                                   const RegistrationOptions& options = {});

/// MSE over the fixed grid of moving sampled through `transform`.
double transformed_mse(const volio::Volume& moving, const volio::Volume& fixed,
                       const volio::Mat4& transform);

/// Box-average downsampling by an integer factor per axis (axes shorter than
/// the factor are left alone). The affine keeps block centres in place.
volio::Volume downsample(const volio::Volume& v, std::size_t factor);

/// Rotation matrix Rz(rz) * Ry(ry) * Rx(rx), angles in radians.
volio::Mat4 euler_rotation(double rx, double ry, double rz);

}  // namespace sahnet::prep
