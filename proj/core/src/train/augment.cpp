#include "sahnet/train/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sahnet/error.hpp"
#include "sahnet/random.hpp"

namespace sahnet::train {
namespace {

std::size_t reflect(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * static_cast<long>(n);
  long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<long>(n) ? m : period - 1 - m);
}

// Row-stochastic smoothing matrix for one axis: the Gaussian kernel folded
// back onto the axis by reflection, so wide kernels stay exact.
std::vector<double> smoothing_matrix(std::size_t n, double sigma) {
  const long radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (long t = -radius; t <= radius; ++t) {
    const double v = std::exp(-0.5 * static_cast<double>(t * t) / (sigma * sigma));
    k[static_cast<std::size_t>(t + radius)] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  std::vector<double> m(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (long t = -radius; t <= radius; ++t)
      m[i * n + reflect(static_cast<long>(i) + t, n)] += k[static_cast<std::size_t>(t + radius)];
  return m;
}

void smooth_axis(std::vector<double>& f, std::size_t nx, std::size_t ny, std::size_t nz, std::size_t axis,
                 double sigma) {
  const std::size_t n = axis == 0 ? nx : axis == 1 ? ny : nz;
  if (n == 1) return;
  const auto m = smoothing_matrix(n, sigma);
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? nx : nx * ny;
  std::vector<double> line(n), out(n);
  for (std::size_t z = 0; z < (axis == 2 ? 1 : nz); ++z)
    for (std::size_t y = 0; y < (axis == 1 ? 1 : ny); ++y)
      for (std::size_t x = 0; x < (axis == 0 ? 1 : nx); ++x) {
        const std::size_t base = x + nx * (y + ny * z);
        for (std::size_t i = 0; i < n; ++i) line[i] = f[base + i * stride];
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += m[i * n + j] * line[j];
          out[i] = acc;
        }
        for (std::size_t i = 0; i < n; ++i) f[base + i * stride] = out[i];
      }
}

double sample(const Grid3& g, double x, double y, double z) {
  const double fx = std::floor(x), fy = std::floor(y), fz = std::floor(z);
  const double tx = x - fx, ty = y - fy, tz = z - fz;
  const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy), z0 = static_cast<long>(fz);
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
        if (w == 0.0) continue;
        const long xi = x0 + dx, yi = y0 + dy, zi = z0 + dz;
        if (xi < 0 || yi < 0 || zi < 0 || xi >= static_cast<long>(g.nx) || yi >= static_cast<long>(g.ny) ||
            zi >= static_cast<long>(g.nz))
          continue;
        acc += w * g.values[g.index(static_cast<std::size_t>(xi), static_cast<std::size_t>(yi),
                                    static_cast<std::size_t>(zi))];
      }
  return acc;
}

}  // namespace

AugConfig AugConfig::none() {
  AugConfig c;
  c.mirror_axes = {false, false, false};
  c.rotation_deg = 0.0;
  c.scale_min = c.scale_max = 1.0;
  c.elastic.enabled = false;
  return c;
}

void AugConfig::validate() const {
  if (!(scale_min > 0.0 && scale_max >= scale_min)) fail(Errc::ConfigInvalid, "augmentation scale range must be positive");
  if (!(mirror_probability >= 0.0 && mirror_probability <= 1.0))
    fail(Errc::ConfigInvalid, "mirror probability must be in [0, 1]");
  if (rotation_deg < 0.0) fail(Errc::ConfigInvalid, "rotation range must be >= 0");
  if (elastic.enabled && !(elastic.sigma > 0.0)) fail(Errc::ConfigInvalid, "elastic sigma must be > 0");
  if (elastic.enabled && elastic.alpha < 0.0) fail(Errc::ConfigInvalid, "elastic alpha must be >= 0");
}

Grid3 mirror(const Grid3& g, std::size_t axis) {
  if (axis > 2) fail(Errc::ConfigInvalid, "mirror axis must be 0, 1 or 2");
  Grid3 out = g;
  for (std::size_t z = 0; z < g.nz; ++z)
    for (std::size_t y = 0; y < g.ny; ++y)
      for (std::size_t x = 0; x < g.nx; ++x) {
        const std::size_t sx = axis == 0 ? g.nx - 1 - x : x;
        const std::size_t sy = axis == 1 ? g.ny - 1 - y : y;
        const std::size_t sz = axis == 2 ? g.nz - 1 - z : z;
        out.values[g.index(x, y, z)] = g.values[g.index(sx, sy, sz)];
      }
  return out;
}

std::vector<double> elastic_field(std::size_t nx, std::size_t ny, std::size_t nz, double alpha, double sigma,
                                  std::uint64_t seed) {
  if (!(sigma > 0.0)) fail(Errc::ConfigInvalid, "elastic sigma must be > 0");
  const std::size_t n = nx * ny * nz;
  std::vector<double> field(3 * n, 0.0);
  if (alpha == 0.0) return field;
  Rng rng(seed);
  std::vector<double> comp(n);
  for (std::size_t c = 0; c < 3; ++c) {
    for (double& v : comp) v = uniform(rng, -1.0, 1.0);
    if (c == 2 && nz == 1) std::fill(comp.begin(), comp.end(), 0.0);  // 2D: in-plane only
    for (std::size_t axis = 0; axis < 3; ++axis) smooth_axis(comp, nx, ny, nz, axis, sigma);
    for (std::size_t i = 0; i < n; ++i) field[3 * i + c] = comp[i];
  }
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    peak = std::max(peak, std::sqrt(field[3 * i] * field[3 * i] + field[3 * i + 1] * field[3 * i + 1] +
                                    field[3 * i + 2] * field[3 * i + 2]));
  if (peak == 0.0) return std::vector<double>(3 * n, 0.0);
  for (double& v : field) v *= alpha / peak;
  return field;
}

Grid3 augment_sample(const Grid3& g, std::uint64_t seed, const AugConfig& config) {
  config.validate();
  if (g.values.size() != g.size()) fail(Errc::ShapeMismatch, "grid size does not match its dimensions");
  Rng rng(seed);
  // Draw everything up front so the stream does not depend on which
  // augmentations are enabled.
  std::array<bool, 3> flip{};
  for (std::size_t a = 0; a < 3; ++a) {
    const double u = uniform01(rng);
    flip[a] = config.mirror_axes[a] && u < config.mirror_probability;
  }
  const double angle = uniform(rng, -config.rotation_deg, config.rotation_deg) * std::numbers::pi / 180.0;
  const double s = uniform(rng, config.scale_min, config.scale_max);
  const std::uint64_t elastic_seed = rng();

  Grid3 out = g;
  for (std::size_t a = 0; a < 3; ++a)
    if (flip[a]) out = mirror(out, a);

  const bool elastic = config.elastic.enabled && config.elastic.alpha > 0.0;
  if (angle == 0.0 && s == 1.0 && !elastic) return out;

  std::vector<double> field;
  if (elastic) field = elastic_field(g.nx, g.ny, g.nz, config.elastic.alpha, config.elastic.sigma, elastic_seed);

  // Output voxel p samples the mirrored grid at c + R^-1 (p + d(p) - c) / s.
  const double cx = (static_cast<double>(g.nx) - 1.0) / 2.0, cy = (static_cast<double>(g.ny) - 1.0) / 2.0,
               cz = (static_cast<double>(g.nz) - 1.0) / 2.0;
  const double ca = std::cos(angle), sa = std::sin(angle);
  Grid3 res = out;
  for (std::size_t z = 0; z < g.nz; ++z)
    for (std::size_t y = 0; y < g.ny; ++y)
      for (std::size_t x = 0; x < g.nx; ++x) {
        const std::size_t i = g.index(x, y, z);
        double px = static_cast<double>(x) - cx, py = static_cast<double>(y) - cy, pz = static_cast<double>(z) - cz;
        if (elastic) {
          px += field[3 * i];
          py += field[3 * i + 1];
          pz += field[3 * i + 2];
        }
        const double qx = (ca * px + sa * py) / s, qy = (-sa * px + ca * py) / s, qz = pz / s;
        res.values[i] = sample(out, cx + qx, cy + qy, cz + qz);
      }
  return res;
}

}  // namespace sahnet::train
