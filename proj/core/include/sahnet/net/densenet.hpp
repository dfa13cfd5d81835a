#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sahnet/net/metadata.hpp"
#include "sahnet/random.hpp"
#include "sahnet/tensor/ops.hpp"

namespace sahnet::net {

using tensor::NormMode;
using tensor::Tape;
using tensor::Tensor;

struct DenseNetConfig {
  std::size_t spatial_dims = 3;
  std::vector<std::size_t> block_layers{6, 12, 24, 16};
  std::size_t growth_rate = 32;
  std::size_t init_channels = 64;
  std::size_t bn_size = 4;
  double compression = 0.5;
  std::size_t num_classes = 2;
  std::size_t in_channels = 1;
  /// Spatial input extent in tensor order (d, h, w), or (h, w) in 2D mode.
  std::vector<std::size_t> input_shape{32, 32, 32};
  double dropout_rate = 0.0;

  static DenseNetConfig densenet121();
  /// Two blocks of two layers, k = 4, 8 initial channels.
  static DenseNetConfig tiny();

  /// Throws Error(ConfigInvalid).
  void validate() const;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

enum class LayerKind { Conv, BatchNorm, Linear };

struct LayerInfo {
  std::string name;
  LayerKind kind;
};

class Model {
 public:
  const DenseNetConfig& config() const noexcept { return config_; }

  const std::vector<NamedTensor>& parameters() const noexcept { return params_; }
  /// Batch-norm running statistics.
  const std::vector<NamedTensor>& buffers() const noexcept { return buffers_; }
  const Tensor& parameter(std::string_view name) const;
  const Tensor& buffer(std::string_view name) const;
  bool has_parameter(std::string_view name) const;
  std::vector<std::string> parameter_names() const;

  /// Layers in forward order.
  const std::vector<LayerInfo>& layers() const noexcept { return layers_; }
  /// Final 3x3 convolution of the last dense block (stem conv when the last
  /// block is empty).
  std::string last_conv_layer() const;

  /// init, then each block output and transition output in order.
  const std::vector<std::size_t>& channel_trace() const noexcept { return trace_; }
  /// Width of the pooled image features (F).
  std::size_t feature_width() const noexcept { return trace_.back(); }
  std::size_t metadata_width() const noexcept { return metadata_ ? metadata_->width() : 0; }
  std::size_t head_input_width() const noexcept { return feature_width() + metadata_width(); }
  bool fused() const noexcept { return metadata_.has_value(); }
  const MetadataSpec* metadata_spec() const noexcept { return metadata_ ? &*metadata_ : nullptr; }
  void set_metadata_spec(const MetadataSpec& spec);

  /// Independent deep copy.
  Model clone() const;

  void set_trainable(const std::vector<std::string>& names, bool trainable);

 private:
  friend Model build(const DenseNetConfig& config, std::uint64_t seed);
  friend Model fuse_metadata(const Model& m, const MetadataSpec& spec, std::uint64_t seed);

  void add_param(std::string name, Tensor t);
  void add_buffer(std::string name, Tensor t);

  DenseNetConfig config_;
  std::vector<NamedTensor> params_;
  std::vector<NamedTensor> buffers_;
  std::map<std::string, std::size_t, std::less<>> param_index_;
  std::map<std::string, std::size_t, std::less<>> buffer_index_;
  std::vector<LayerInfo> layers_;
  std::vector<std::size_t> trace_;
  std::optional<MetadataSpec> metadata_;
};

/// Conv weights He-normal (variance 2/fan_in), BN gamma 1 beta 0, linear
/// uniform in +-1/sqrt(fan_in). Every value is rounded to float32 so the
/// float32 checkpoint payload is lossless.
Model build(const DenseNetConfig& config, std::uint64_t seed = 0);

/// Rebuilds the head over [features | metadata]. Image rows of the head are
/// copied, metadata rows freshly initialized. Throws Error(AlreadyFused).
Model fuse_metadata(const Model& m, const MetadataSpec& spec, std::uint64_t seed = 0);

struct Partition {
  std::vector<std::string> backbone;
  std::vector<std::string> head;
};
Partition param_partition(const Model& m);

/// Capture name of the rectified final feature map that global pooling
/// reads (after final.bn).
inline constexpr std::string_view kFeatureMap = "features";

struct ForwardOptions {
  NormMode mode = NormMode::Eval;
  /// Conv layer (or kFeatureMap) whose output is returned in
  /// ForwardOutput::captured.
  std::string capture;
  /// Dropout is active only when a generator is given.
  Rng* dropout_rng = nullptr;
};

struct ForwardOutput {
  Tensor logits;    // [N, num_classes]
  Tensor probs;     // softmax(logits)
  Tensor features;  // pooled image features [N, F]
  Tensor captured;  // requested activation, undefined if none
};

/// Train mode uses batch statistics and updates the model's running
/// statistics in place. Throws ShapeMismatch, MetadataMissing, UnknownLayer,
/// NotConvolutional.
ForwardOutput forward(const Model& m, Tape& tape, Tensor batch, Tensor metadata = {},
                      const ForwardOptions& options = {});

/// Eval-mode probabilities without recording.
Tensor predict(const Model& m, Tensor batch, Tensor metadata = {});

/// One dense block (1-based index) on its own.
Tensor dense_block(const Model& m, Tape& tape, Tensor x, std::size_t block, NormMode mode);
/// One transition (1-based index). Throws Error(SpatialTooSmall).
Tensor transition(const Model& m, Tape& tape, Tensor x, std::size_t index, NormMode mode);

}  // namespace sahnet::net
