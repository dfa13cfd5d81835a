#include "sahnet/prep/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "sahnet/random.hpp"

namespace sahnet::prep {

using volio::Mat4;
using volio::Shape3;
using volio::Volume;

namespace {

Mat4 centred_affine(Shape3 s, double spacing) {
  Mat4 a = Mat4::diagonal(spacing, spacing, spacing);
  a(0, 3) = -spacing * (double(s.nx) - 1) / 2;
  a(1, 3) = -spacing * (double(s.ny) - 1) / 2;
  a(2, 3) = -spacing * (double(s.nz) - 1) / 2;
  return a;
}

// Normalised ellipsoid radius of voxel (x,y,z) about the grid centre.
double ellipsoid_r(Shape3 s, double x, double y, double z, double ax, double ay, double az) {
  const double cx = (double(s.nx) - 1) / 2, cy = (double(s.ny) - 1) / 2,
               cz = (double(s.nz) - 1) / 2;
  const double dx = (x - cx) / ax, dy = (y - cy) / ay;
  const double dz = s.nz > 1 ? (z - cz) / az : 0.0;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

Volume head_phantom(const HeadPhantomParams& p) {
  const Shape3 s = p.shape;
  Rng rng(mix_seed(p.seed, 0x4845414455ULL));
  const double ax = 0.42 * double(s.nx), ay = 0.46 * double(s.ny), az = 0.42 * double(s.nz);
  std::vector<float> data(s.size());
  std::size_t idx = 0;
  for (std::size_t z = 0; z < s.nz; ++z)
    for (std::size_t y = 0; y < s.ny; ++y)
      for (std::size_t x = 0; x < s.nx; ++x, ++idx) {
        const double r = ellipsoid_r(s, double(x), double(y), double(z), ax, ay, az);
        const double shell = p.shell_vox / std::min({ax, ay, az});
        double v = p.air_hu;
        if (r <= 1.0 - shell) {
          v = p.brain_hu +
              p.texture_hu * std::sin(0.35 * double(x)) * std::cos(0.27 * double(y) + 0.2 * double(z));
          // Lateral ventricles.
          const double rv1 = ellipsoid_r(s, double(x) + 0.12 * double(s.nx), double(y), double(z),
                                         0.06 * double(s.nx), 0.16 * double(s.ny), 0.08 * double(s.nz));
          const double rv2 = ellipsoid_r(s, double(x) - 0.12 * double(s.nx), double(y), double(z),
                                         0.06 * double(s.nx), 0.16 * double(s.ny), 0.08 * double(s.nz));
          if (rv1 <= 1.0 || rv2 <= 1.0) v = p.csf_hu;
        } else if (r <= 1.0) {
          v = p.bone_hu;
        }
        if (p.noise_hu > 0 && r <= 1.0) v += normal(rng, 0.0, p.noise_hu);
        data[idx] = static_cast<float>(v);
      }
  return Volume(s, centred_affine(s, p.spacing_mm), std::move(data), volio::IntensityUnit::HU);
}

Volume brain_template(Shape3 s, double spacing_mm) {
  const double ax = 0.38 * double(s.nx), ay = 0.42 * double(s.ny), az = 0.38 * double(s.nz);
  std::vector<float> data(s.size());
  std::size_t idx = 0;
  for (std::size_t z = 0; z < s.nz; ++z)
    for (std::size_t y = 0; y < s.ny; ++y)
      for (std::size_t x = 0; x < s.nx; ++x, ++idx) {
        const double r = ellipsoid_r(s, double(x), double(y), double(z), ax, ay, az);
        // Soft edge so the MSE landscape is smooth.
        data[idx] = static_cast<float>(0.5 * (1.0 - std::tanh((r - 1.0) * 8.0)) *
                                       (0.8 + 0.2 * std::cos(3.0 * r)));
      }
  return Volume(s, centred_affine(s, spacing_mm), std::move(data), volio::IntensityUnit::Normalized);
}

Volume smooth_blobs(Shape3 s, double spacing_mm) {
  struct Blob {
    double cx, cy, cz, sx, sy, sz, amp;
  };
  // Centres and widths as fractions of the grid.
  const Blob blobs[] = {{0.50, 0.50, 0.50, 0.22, 0.16, 0.18, 100.0},
                        {0.32, 0.60, 0.45, 0.08, 0.10, 0.09, 60.0},
                        {0.66, 0.35, 0.58, 0.10, 0.07, 0.08, -40.0},
                        {0.58, 0.70, 0.40, 0.06, 0.06, 0.10, 50.0}};
  std::vector<float> data(s.size());
  std::size_t idx = 0;
  for (std::size_t z = 0; z < s.nz; ++z)
    for (std::size_t y = 0; y < s.ny; ++y)
      for (std::size_t x = 0; x < s.nx; ++x, ++idx) {
        double v = 0.0;
        for (const auto& b : blobs) {
          const double dx = (double(x) - b.cx * double(s.nx)) / (b.sx * double(s.nx));
          const double dy = (double(y) - b.cy * double(s.ny)) / (b.sy * double(s.ny));
          const double dz = s.nz > 1 ? (double(z) - b.cz * double(s.nz)) / (b.sz * double(s.nz)) : 0.0;
          v += b.amp * std::exp(-0.5 * (dx * dx + dy * dy + dz * dz));
        }
        data[idx] = static_cast<float>(v);
      }
  return Volume(s, centred_affine(s, spacing_mm), std::move(data), volio::IntensityUnit::HU);
}

}  // namespace sahnet::prep
