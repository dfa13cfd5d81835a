#include "sahnet/prep/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "sahnet/error.hpp"
#include "sahnet/volio/resample.hpp"

namespace sahnet::prep {
namespace {

template <typename F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw Error(e.code(), stage, std::string(stage) + ": " + e.what());
  }
}

}  // namespace

double percentile(std::vector<float> values, double pct) {
  if (values.empty()) fail(Errc::DegenerateInput, "percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(pct, 0.0, 100.0) / 100.0 * double(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - double(lo);
  return values[lo] + frac * (double(values[hi]) - values[lo]);
}

PipelineResult run_pipeline(const volio::Volume& hu, const volio::Volume& tmpl,
                            const PipelineOptions& opt) {
  QcRecord qc;
  qc.intensity_mode =
      opt.intensity.mode == IntensityMode::ShiftClamp ? "ShiftClamp" : "WindowStretch";

  const volio::Volume aligned = staged("resample", [&] {
    if (volio::is_axis_aligned(hu.affine())) return hu;
    qc.resampled_to_axis_aligned = true;
    const auto grid = volio::axis_aligned_grid(hu);
    return volio::resample(hu, grid.affine, grid.shape, volio::Interp::Trilinear,
                           static_cast<float>(opt.intensity.hu_min));
  });

  auto nonneg = staged("to_nonnegative", [&] { return to_nonnegative(aligned, opt.intensity); });
  qc.clamped_voxels = nonneg.clamped_voxels;

  const BrainMask mask =
      staged("extract_brain", [&] { return extract_brain(nonneg.volume, opt.brain, opt.intensity); });
  qc.mask_volume_ml = mask.volume_ml();

  const volio::Volume normalised = staged("normalize", [&] {
    std::vector<float> inside;
    inside.reserve(mask.voxel_count);
    const auto d = nonneg.volume.data();
    for (std::size_t i = 0; i < d.size(); ++i)
      if (mask.grid[i]) inside.push_back(d[i]);
    const double lo = percentile(inside, opt.percentile_low);
    const double hi = percentile(inside, opt.percentile_high);
    qc.window_low = lo;
    qc.window_high = hi;
    std::vector<float> out(d.size(), 0.0f);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!mask.grid[i]) continue;
      out[i] = hi > lo ? static_cast<float>(std::clamp((d[i] - lo) / (hi - lo), 0.0, 1.0)) : 1.0f;
    }
    return nonneg.volume.with_data(std::move(out), volio::IntensityUnit::Normalized);
  });

  auto reg = staged("register", [&] { return register_affine(normalised, tmpl, opt.registration); });
  qc.registration_initial_mse = reg.diagnostics.initial_mse;
  qc.registration_mse = reg.diagnostics.final_mse;
  qc.registration_iterations = reg.diagnostics.iterations;
  qc.registration_converged = reg.diagnostics.converged;

  return staged("output", [&] {
    const volio::Volume mask_vol(mask.shape, mask.affine,
                                 std::vector<float>(mask.grid.begin(), mask.grid.end()),
                                 volio::IntensityUnit::Normalized);
    const volio::Mat4 pull = reg.transform.matrix * tmpl.affine();
    const volio::Volume warped_mask = volio::resample_mapped(mask_vol, pull, tmpl.affine(),
                                                             tmpl.shape(), volio::Interp::Nearest);
    BrainMask out_mask{tmpl.shape(), tmpl.affine(), std::vector<std::uint8_t>(tmpl.shape().size()), 0};
    std::vector<float> out(reg.registered.data().begin(), reg.registered.data().end());
    const auto wm = warped_mask.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
      out_mask.grid[i] = wm[i] > 0.5f;
      out_mask.voxel_count += out_mask.grid[i];
      out[i] = out_mask.grid[i] ? std::clamp(out[i], 0.0f, 1.0f) : 0.0f;
    }
    return PipelineResult{volio::Volume(tmpl.shape(), tmpl.affine(), std::move(out),
                                        volio::IntensityUnit::Normalized),
                          std::move(out_mask), reg.transform, qc};
  });
}

}  // namespace sahnet::prep
