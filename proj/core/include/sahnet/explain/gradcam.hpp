#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sahnet/net/densenet.hpp"
#include "sahnet/tensor/ops.hpp"
#include "sahnet/volio/volume.hpp"

namespace sahnet::explain {

using tensor::Spatial;
using tensor::Tape;
using tensor::Tensor;

/// Map in [0, 1] at input resolution, x fastest (d = z slowest).
struct Saliency {
  Spatial shape;
  std::vector<double> values;
  int target_class = 0;
  std::string source_layer;
  bool all_zero = false;
  /// Peak of the rectified map before normalization.
  double raw_max = 0.0;
};

/// Rectified class-activation map at the activation's own resolution:
/// ReLU(sum_k alpha_k A_k) with alpha_k the spatial mean of dScore/dA_k.
/// `activation` is [1, K, *spatial]; `grad` has the same layout.
std::vector<double> cam_map(const Tensor& activation, std::span<const double> grad);

/// Trilinear (bilinear when depth is 1) resize with half-pixel centres.
std::vector<double> upsample(const std::vector<double>& values, Spatial from, Spatial to);

struct CamGraph {
  Tensor activation;  // produced on the tape
  Tensor score;       // scalar logit reachable from activation
};

/// Generic Grad-CAM over any graph. `run` builds the graph on the given tape
/// (which never writes leaf gradients).
Saliency grad_cam(const std::function<CamGraph(Tape&)>& run, Spatial output_shape, int class_idx,
                  const std::string& layer_name = "");

/// Grad-CAM of a model for one sample image [C, *spatial] in eval mode. The
/// empty layer name selects net::kFeatureMap, where the map reduces to the
/// head weights times the pooled features (CAM). Throws UnknownLayer,
/// NotConvolutional.
Saliency grad_cam(const net::Model& m, const Tensor& image, int class_idx, const std::string& layer_name = "",
                  const Tensor& metadata = {});

/// Indices with normalized saliency >= threshold (0.9 = top decile of the
/// value range); empty for an all-zero map.
std::vector<std::size_t> top_decile(const Saliency& s, double threshold = 0.9);
/// Mean (x, y, z) voxel of the top-decile set.
std::array<double, 3> top_decile_centroid(const Saliency& s, double threshold = 0.9);

/// Writes the map as NIfTI on the reference grid. Throws ShapeMismatch.
void export_overlay(const Saliency& s, const volio::Volume& reference, const std::filesystem::path& path);

}  // namespace sahnet::explain
