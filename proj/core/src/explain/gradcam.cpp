#include "sahnet/explain/gradcam.hpp"

#include <algorithm>
#include <cmath>

#include "sahnet/error.hpp"
#include "sahnet/net/convert.hpp"
#include "sahnet/volio/nifti.hpp"

namespace sahnet::explain {
namespace {

struct Tap {
  std::size_t i0, i1;
  double t;
};

// Half-pixel source coordinate for each output index along one axis.
std::vector<Tap> axis_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  for (std::size_t o = 0; o < out; ++o) {
    double s = (static_cast<double>(o) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(s));
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, s - static_cast<double>(i0)};
  }
  return taps;
}

Saliency finish(std::vector<double> map, Spatial from, Spatial to, int class_idx, const std::string& layer) {
  Saliency s;
  s.shape = to;
  s.target_class = class_idx;
  s.source_layer = layer;
  s.values = upsample(map, from, to);
  for (double& v : s.values) v = std::max(v, 0.0);
  s.raw_max = s.values.empty() ? 0.0 : *std::max_element(s.values.begin(), s.values.end());
  if (s.raw_max > 0.0) {
    for (double& v : s.values) v /= s.raw_max;
  } else {
    std::fill(s.values.begin(), s.values.end(), 0.0);
    s.all_zero = true;
  }
  return s;
}

}  // namespace

std::vector<double> cam_map(const Tensor& activation, std::span<const double> grad) {
  if (activation.rank() < 3 || activation.dim(0) != 1)
    fail(Errc::ShapeMismatch, "cam_map needs a single-sample activation [1, K, *spatial]");
  if (grad.size() != activation.numel()) fail(Errc::ShapeMismatch, "activation gradient has the wrong size");
  const std::size_t K = activation.dim(1), S = activation.numel() / K;
  const auto a = activation.data();
  std::vector<double> map(S, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    double alpha = 0.0;
    for (std::size_t s = 0; s < S; ++s) alpha += grad[k * S + s];
    alpha /= static_cast<double>(S);
    for (std::size_t s = 0; s < S; ++s) map[s] += alpha * a[k * S + s];
  }
  for (double& v : map) v = std::max(v, 0.0);
  return map;
}

std::vector<double> upsample(const std::vector<double>& values, Spatial from, Spatial to) {
  if (values.size() != from.count()) fail(Errc::ShapeMismatch, "upsample input size does not match its shape");
  const auto tz = axis_taps(from.d, to.d), ty = axis_taps(from.h, to.h), tx = axis_taps(from.w, to.w);
  std::vector<double> out(to.count());
  auto at = [&](std::size_t z, std::size_t y, std::size_t x) { return values[(z * from.h + y) * from.w + x]; };
  for (std::size_t z = 0; z < to.d; ++z)
    for (std::size_t y = 0; y < to.h; ++y)
      for (std::size_t x = 0; x < to.w; ++x) {
        const Tap& a = tz[z];
        const Tap& b = ty[y];
        const Tap& c = tx[x];
        double acc = 0.0;
        for (int dz = 0; dz < 2; ++dz)
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const double w = (dz ? a.t : 1 - a.t) * (dy ? b.t : 1 - b.t) * (dx ? c.t : 1 - c.t);
              if (w == 0.0) continue;
              acc += w * at(dz ? a.i1 : a.i0, dy ? b.i1 : b.i0, dx ? c.i1 : c.i0);
            }
        out[(z * to.h + y) * to.w + x] = acc;
      }
  return out;
}

Saliency grad_cam(const std::function<CamGraph(Tape&)>& run, Spatial output_shape, int class_idx,
                  const std::string& layer_name) {
  Tape tape(Tape::Options{true, false});
  CamGraph g = run(tape);
  if (!g.activation.defined()) fail(Errc::UnknownLayer, "graph did not expose the requested activation");
  if (g.activation.is_leaf()) fail(Errc::NotConvolutional, "activation was not produced by a recorded op");
  tape.backward(g.score);
  std::vector<double> grad(g.activation.numel(), 0.0);
  const auto gr = std::as_const(g.activation).grad();
  std::copy(gr.begin(), gr.end(), grad.begin());
  const Spatial from = tensor::spatial_of(g.activation);
  return finish(cam_map(g.activation, grad), from, output_shape, class_idx, layer_name);
}

Saliency grad_cam(const net::Model& m, const Tensor& image, int class_idx, const std::string& layer_name,
                  const Tensor& metadata) {
  if (class_idx < 0 || static_cast<std::size_t>(class_idx) >= m.config().num_classes)
    fail(Errc::UnknownClass, "class index out of range");
  const std::string layer = layer_name.empty() ? std::string(net::kFeatureMap) : layer_name;
  const Tensor batch = net::stack({image});
  auto run = [&](Tape& tape) {
    net::ForwardOptions o;
    o.mode = tensor::NormMode::Eval;
    o.capture = layer;
    const auto out = net::forward(m, tape, batch, metadata, o);
    return CamGraph{out.captured, tensor::pick(tape, out.logits, 0, static_cast<std::size_t>(class_idx))};
  };
  return grad_cam(run, tensor::spatial_of(batch), class_idx, layer);
}

std::vector<std::size_t> top_decile(const Saliency& s, double threshold) {
  std::vector<std::size_t> out;
  if (s.all_zero) return out;
  for (std::size_t i = 0; i < s.values.size(); ++i)
    if (s.values[i] >= threshold) out.push_back(i);
  return out;
}

std::array<double, 3> top_decile_centroid(const Saliency& s, double threshold) {
  const auto idx = top_decile(s, threshold);
  std::array<double, 3> c{0, 0, 0};
  if (idx.empty()) return c;
  for (auto i : idx) {
    c[0] += static_cast<double>(i % s.shape.w);
    c[1] += static_cast<double>((i / s.shape.w) % s.shape.h);
    c[2] += static_cast<double>(i / (s.shape.w * s.shape.h));
  }
  for (double& v : c) v /= static_cast<double>(idx.size());
  return c;
}

void export_overlay(const Saliency& s, const volio::Volume& reference, const std::filesystem::path& path) {
  const auto r = reference.shape();
  if (r.nx != s.shape.w || r.ny != s.shape.h || r.nz != s.shape.d)
    fail(Errc::ShapeMismatch, "saliency shape does not match the reference volume");
  volio::write_nifti_file(path, net::grid_to_volume(s.values, reference, volio::IntensityUnit::Normalized));
}

}  // namespace sahnet::explain
