#include "sahnet/prep/brain_mask.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "sahnet/error.hpp"

namespace sahnet::prep {
namespace {

using volio::Shape3;

constexpr std::array<std::array<int, 3>, 6> kFaceNeighbours{
    {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};

// Flood fill from `seed` over voxels equal to `value`, writing `label`.
std::size_t flood(const std::vector<std::uint8_t>& grid, Shape3 s, std::size_t seed,
                  std::uint8_t value, std::vector<std::int32_t>& labels,
                  std::int32_t label, std::vector<std::size_t>& stack) {
  std::size_t count = 0;
  stack.clear();
  stack.push_back(seed);
  labels[seed] = label;
  const std::size_t sxy = s.nx * s.ny;
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    ++count;
    const std::size_t x = i % s.nx, y = (i / s.nx) % s.ny, z = i / sxy;
    for (const auto& d : kFaceNeighbours) {
      const auto nx = static_cast<long>(x) + d[0];
      const auto ny = static_cast<long>(y) + d[1];
      const auto nz = static_cast<long>(z) + d[2];
      if (nx < 0 || ny < 0 || nz < 0 || nx >= static_cast<long>(s.nx) ||
          ny >= static_cast<long>(s.ny) || nz >= static_cast<long>(s.nz))
        continue;
      const std::size_t j = static_cast<std::size_t>(nx) +
                            s.nx * (static_cast<std::size_t>(ny) + s.ny * static_cast<std::size_t>(nz));
      if (labels[j] == 0 && grid[j] == value) {
        labels[j] = label;
        stack.push_back(j);
      }
    }
  }
  return count;
}

}  // namespace

double BrainMask::volume_ml() const {
  return static_cast<double>(voxel_count) * std::abs(volio::det3(affine)) / 1000.0;
}

std::size_t keep_largest_component(std::vector<std::uint8_t>& grid, Shape3 s) {
  std::vector<std::int32_t> labels(grid.size(), 0);
  std::vector<std::size_t> stack;
  std::int32_t next = 0, best_label = 0;
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] == 0 || labels[i] != 0) continue;
    const std::size_t n = flood(grid, s, i, 1, labels, ++next, stack);
    if (n > best) {
      best = n;
      best_label = next;
    }
  }
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = labels[i] == best_label && best > 0;
  return best;
}

std::vector<std::uint8_t> close_ball(const std::vector<std::uint8_t>& grid, Shape3 s,
                                     int radius) {
  if (radius <= 0) return grid;
  const auto r = static_cast<std::size_t>(radius);
  const Shape3 p{s.nx + 2 * r, s.ny + 2 * r, s.nz + 2 * (s.nz > 1 ? r : 0)};
  const std::size_t rz = s.nz > 1 ? r : 0;
  std::vector<std::array<long, 3>> ball;
  for (int dz = -static_cast<int>(rz); dz <= static_cast<int>(rz); ++dz)
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx)
        if (dx * dx + dy * dy + dz * dz <= radius * radius) ball.push_back({dx, dy, dz});

  auto pidx = [&](std::size_t x, std::size_t y, std::size_t z) {
    return x + p.nx * (y + p.ny * z);
  };
  std::vector<std::uint8_t> padded(p.size(), 0);
  for (std::size_t z = 0; z < s.nz; ++z)
    for (std::size_t y = 0; y < s.ny; ++y)
      for (std::size_t x = 0; x < s.nx; ++x)
        padded[pidx(x + r, y + r, z + rz)] = grid[x + s.nx * (y + s.ny * z)];

  // Dilation: scatter each foreground voxel over the ball.
  std::vector<std::uint8_t> dilated(p.size(), 0);
  for (std::size_t z = 0; z < p.nz; ++z)
    for (std::size_t y = 0; y < p.ny; ++y)
      for (std::size_t x = 0; x < p.nx; ++x) {
        if (!padded[pidx(x, y, z)]) continue;
        for (const auto& o : ball) {
          const long X = static_cast<long>(x) + o[0], Y = static_cast<long>(y) + o[1],
                     Z = static_cast<long>(z) + o[2];
          if (X < 0 || Y < 0 || Z < 0 || X >= static_cast<long>(p.nx) ||
              Y >= static_cast<long>(p.ny) || Z >= static_cast<long>(p.nz))
            continue;
          dilated[pidx(X, Y, Z)] = 1;
        }
      }
  // Erosion: a voxel survives when the whole ball lies in the dilated set.
  std::vector<std::uint8_t> out(grid.size(), 0);
  for (std::size_t z = 0; z < s.nz; ++z)
    for (std::size_t y = 0; y < s.ny; ++y)
      for (std::size_t x = 0; x < s.nx; ++x) {
        bool keep = true;
        for (const auto& o : ball) {
          const long X = static_cast<long>(x + r) + o[0], Y = static_cast<long>(y + r) + o[1],
                     Z = static_cast<long>(z + rz) + o[2];
          if (!dilated[pidx(X, Y, Z)]) {
            keep = false;
            break;
          }
        }
        out[x + s.nx * (y + s.ny * z)] = keep;
      }
  return out;
}

void fill_holes(std::vector<std::uint8_t>& grid, Shape3 s) {
  std::vector<std::int32_t> labels(grid.size(), 0);
  std::vector<std::size_t> stack;
  auto seed = [&](std::size_t x, std::size_t y, std::size_t z) {
    const std::size_t i = x + s.nx * (y + s.ny * z);
    if (grid[i] == 0 && labels[i] == 0) flood(grid, s, i, 0, labels, 1, stack);
  };
  for (std::size_t z = 0; z < s.nz; ++z)
    for (std::size_t y = 0; y < s.ny; ++y)
      for (std::size_t x = 0; x < s.nx; ++x) {
        const bool border = x == 0 || y == 0 || x == s.nx - 1 || y == s.ny - 1 ||
                            (s.nz > 1 && (z == 0 || z == s.nz - 1));
        if (border) seed(x, y, z);
      }
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i] == 0 && labels[i] == 0) grid[i] = 1;
}

BrainMask extract_brain(const volio::Volume& v, const BrainExtractionParams& params,
                        const IntensityMap& map) {
  double lo = params.tissue_low_hu, hi = params.tissue_high_hu;
  if (v.unit() == volio::IntensityUnit::NonNegative) {
    lo = map.apply(lo);
    hi = map.apply(hi);
  } else if (v.unit() != volio::IntensityUnit::HU) {
    fail(Errc::InvariantViolation, "extract_brain expects a HU or NonNegative volume");
  }
  const Shape3 s = v.shape();
  std::vector<std::uint8_t> grid(s.size(), 0);
  std::size_t inside = 0;
  const auto data = v.data();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = data[i] >= lo && data[i] <= hi;
    inside += grid[i];
  }
  if (inside == 0) fail(Errc::EmptyMask, "no voxel inside the tissue window");

  keep_largest_component(grid, s);
  grid = close_ball(grid, s, params.closing_radius_vox);
  fill_holes(grid, s);
  const std::size_t n = keep_largest_component(grid, s);
  if (n == 0) fail(Errc::EmptyMask, "mask vanished after morphology");
  return {s, v.affine(), std::move(grid), n};
}

volio::Volume apply_mask(const volio::Volume& v, const BrainMask& mask) {
  if (!(mask.shape == v.shape()))
    fail(Errc::ShapeMismatch, "mask and volume shapes differ");
  std::vector<float> out(v.data().begin(), v.data().end());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!mask.grid[i]) out[i] = 0.0f;
  return v.with_data(std::move(out));
}

double dice(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size()) fail(Errc::ShapeMismatch, "dice inputs differ in size");
  std::size_t inter = 0, sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    sa += a[i] != 0;
    sb += b[i] != 0;
  }
  if (sa + sb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(sa + sb);
}

}  // namespace sahnet::prep
