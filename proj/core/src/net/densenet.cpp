#include "sahnet/net/densenet.hpp"

#include <algorithm>
#include <cmath>

#include "sahnet/error.hpp"

namespace sahnet::net {
namespace {

using tensor::Shape;

std::string block_layer(std::size_t b, std::size_t l) {
  return "block" + std::to_string(b) + ".layer" + std::to_string(l);
}

std::size_t pooled(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
  if (in + 2 * p < k) return 0;
  return (in + 2 * p - k) / s + 1;
}

Shape kernel_shape(const DenseNetConfig& c, std::size_t co, std::size_t ci, std::size_t k) {
  Shape s{co, ci};
  for (std::size_t i = 0; i < c.spatial_dims; ++i) s.push_back(k);
  return s;
}

class Runner {
 public:
  Runner(const Model& m, Tape& tape, const ForwardOptions& o) : m_(m), tape_(tape), o_(o) {}

  Tensor conv(const std::string& layer, Tensor x, std::size_t stride, std::size_t pad) {
    Tensor y = tensor::conv_nd(tape_, x, m_.parameter(layer + ".weight"), Tensor{}, {stride}, {pad});
    if (layer == o_.capture) captured = y;
    return y;
  }

  Tensor bn_relu(const std::string& layer, Tensor x) {
    tensor::BatchNormState st{m_.buffer(layer + ".running_mean"), m_.buffer(layer + ".running_var")};
    Tensor y = tensor::batch_norm(tape_, x, m_.parameter(layer + ".gamma"), m_.parameter(layer + ".beta"),
                                  st, o_.mode);
    return tensor::relu(tape_, y);
  }

  Tensor block(Tensor x, std::size_t b) {
    const auto& cfg = m_.config();
    const std::size_t L = cfg.block_layers.at(b - 1);
    std::vector<Tensor> feats{x};
    for (std::size_t l = 1; l <= L; ++l) {
      const std::string name = block_layer(b, l);
      Tensor in = feats.size() == 1 ? feats[0] : tensor::concat_channels(tape_, feats);
      Tensor h = conv(name + ".conv1", bn_relu(name + ".bn1", in), 1, 0);
      h = conv(name + ".conv2", bn_relu(name + ".bn2", h), 1, 1);
      h = tensor::dropout(tape_, h, cfg.dropout_rate, o_.dropout_rng);
      feats.push_back(h);
    }
    return feats.size() == 1 ? feats[0] : tensor::concat_channels(tape_, feats);
  }

  Tensor trans(Tensor x, std::size_t t) {
    for (std::size_t i = 2; i < x.rank(); ++i)
      if (x.dim(i) < 2)
        fail(Errc::SpatialTooSmall, "transition" + std::to_string(t) + " needs every spatial dim >= 2, got " +
                                        tensor::to_string(x.shape()));
    const std::string name = "transition" + std::to_string(t);
    Tensor h = conv(name + ".conv", bn_relu(name + ".bn", x), 1, 0);
    return tensor::avg_pool(tape_, h, 2, 2);
  }

  Tensor captured;

 private:
  const Model& m_;
  Tape& tape_;
  const ForwardOptions& o_;
};

void check_capture(const Model& m, const std::string& capture) {
  if (capture.empty() || capture == kFeatureMap) return;
  for (const auto& l : m.layers()) {
    if (l.name != capture) continue;
    if (l.kind != LayerKind::Conv) fail(Errc::NotConvolutional, "layer '" + capture + "' is not a convolution");
    return;
  }
  fail(Errc::UnknownLayer, "no layer named '" + capture + "'");
}

}  // namespace

DenseNetConfig DenseNetConfig::densenet121() { return DenseNetConfig{}; }

DenseNetConfig DenseNetConfig::tiny() {
  DenseNetConfig c;
  c.block_layers = {2, 2};
  c.growth_rate = 4;
  c.init_channels = 8;
  return c;
}

void DenseNetConfig::validate() const {
  auto bad = [](const std::string& msg) { fail(Errc::ConfigInvalid, msg); };
  if (spatial_dims != 2 && spatial_dims != 3) bad("spatial_dims must be 2 or 3");
  if (input_shape.size() != spatial_dims) bad("input_shape needs one extent per spatial dim");
  if (block_layers.empty()) bad("at least one dense block is required");
  if (growth_rate == 0 || init_channels == 0 || bn_size == 0 || num_classes < 2 || in_channels == 0)
    bad("growth_rate, init_channels, bn_size, in_channels must be positive and num_classes >= 2");
  if (!(compression > 0.0 && compression <= 1.0)) bad("compression must be in (0, 1]");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) bad("dropout_rate must be in [0, 1)");
  std::size_t c = init_channels;
  for (std::size_t b = 0; b + 1 < block_layers.size(); ++b) {
    c += block_layers[b] * growth_rate;
    c = static_cast<std::size_t>(std::floor(compression * static_cast<double>(c)));
    if (c < 1) bad("compression leaves no channels after transition " + std::to_string(b + 1));
  }
  for (std::size_t d = 0; d < spatial_dims; ++d) {
    std::size_t s = pooled(input_shape[d], 7, 2, 3);
    s = s ? pooled(s, 3, 2, 1) : 0;
    for (std::size_t t = 1; t < block_layers.size() && s; ++t) s = s >= 2 ? s / 2 : 0;
    if (s == 0) bad("input_shape is too small for " + std::to_string(block_layers.size()) + " blocks");
  }
}

const Tensor& Model::parameter(std::string_view name) const {
  auto it = param_index_.find(name);
  if (it == param_index_.end()) fail(Errc::UnknownTensorName, "no parameter named '" + std::string(name) + "'");
  return params_[it->second].value;
}

const Tensor& Model::buffer(std::string_view name) const {
  auto it = buffer_index_.find(name);
  if (it == buffer_index_.end()) fail(Errc::UnknownTensorName, "no buffer named '" + std::string(name) + "'");
  return buffers_[it->second].value;
}

bool Model::has_parameter(std::string_view name) const { return param_index_.contains(name); }

std::vector<std::string> Model::parameter_names() const {
  std::vector<std::string> out;
  for (const auto& p : params_) out.push_back(p.name);
  return out;
}

std::string Model::last_conv_layer() const {
  std::string last;
  for (const auto& l : layers_)
    if (l.kind == LayerKind::Conv && l.name.rfind("transition", 0) != 0) last = l.name;
  return last;
}

void Model::set_metadata_spec(const MetadataSpec& spec) {
  if (!metadata_) fail(Errc::MetadataMissing, "model is not fused with metadata");
  metadata_ = spec;
}

Model Model::clone() const {
  Model m = *this;
  for (auto& p : m.params_) {
    const bool rg = p.value.requires_grad();
    p.value = p.value.clone();
    p.value.set_requires_grad(rg);
  }
  for (auto& b : m.buffers_) b.value = b.value.clone();
  return m;
}

void Model::set_trainable(const std::vector<std::string>& names, bool trainable) {
  for (const auto& n : names) {
    Tensor t = parameter(n);
    t.set_requires_grad(trainable);
  }
}

void Model::add_param(std::string name, Tensor t) {
  if (param_index_.contains(name)) fail(Errc::ConfigInvalid, "duplicate parameter name " + name);
  tensor::round_to_float(t);
  t.set_requires_grad(true);
  param_index_.emplace(name, params_.size());
  params_.push_back({std::move(name), std::move(t)});
}

void Model::add_buffer(std::string name, Tensor t) {
  buffer_index_.emplace(name, buffers_.size());
  buffers_.push_back({std::move(name), std::move(t)});
}

Model build(const DenseNetConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config_ = config;
  std::uint64_t counter = 0;

  auto conv = [&](const std::string& layer, std::size_t co, std::size_t ci, std::size_t k) {
    Tensor w(kernel_shape(config, co, ci, k));
    const double fan_in = static_cast<double>(w.numel() / co);
    const double sd = std::sqrt(2.0 / fan_in);
    Rng rng(mix_seed(seed, ++counter));
    for (double& v : w.data()) v = normal(rng, 0.0, sd);
    m.add_param(layer + ".weight", w);
    m.layers_.push_back({layer, LayerKind::Conv});
  };
  auto bn = [&](const std::string& layer, std::size_t c) {
    Tensor gamma({c});
    for (double& v : gamma.data()) v = 1.0;
    m.add_param(layer + ".gamma", gamma);
    m.add_param(layer + ".beta", Tensor({c}));
    Tensor var({c});
    for (double& v : var.data()) v = 1.0;
    m.add_buffer(layer + ".running_mean", Tensor({c}));
    m.add_buffer(layer + ".running_var", var);
    m.layers_.push_back({layer, LayerKind::BatchNorm});
  };

  std::size_t c = config.init_channels;
  conv("stem.conv", c, config.in_channels, 7);
  bn("stem.bn", c);
  m.trace_.push_back(c);
  const std::size_t k = config.growth_rate, inner = config.bn_size * config.growth_rate;
  for (std::size_t b = 1; b <= config.block_layers.size(); ++b) {
    for (std::size_t l = 1; l <= config.block_layers[b - 1]; ++l) {
      const std::string name = block_layer(b, l);
      bn(name + ".bn1", c + (l - 1) * k);
      conv(name + ".conv1", inner, c + (l - 1) * k, 1);
      bn(name + ".bn2", inner);
      conv(name + ".conv2", k, inner, 3);
    }
    c += config.block_layers[b - 1] * k;
    m.trace_.push_back(c);
    if (b == config.block_layers.size()) break;
    const std::string name = "transition" + std::to_string(b);
    const auto out = static_cast<std::size_t>(std::floor(config.compression * static_cast<double>(c)));
    bn(name + ".bn", c);
    conv(name + ".conv", out, c, 1);
    c = out;
    m.trace_.push_back(c);
  }
  bn("final.bn", c);

  Tensor w({c, config.num_classes}), bias({config.num_classes});
  const double bound = 1.0 / std::sqrt(static_cast<double>(c));
  Rng rng(mix_seed(seed, ++counter));
  for (double& v : w.data()) v = uniform(rng, -bound, bound);
  for (double& v : bias.data()) v = uniform(rng, -bound, bound);
  m.add_param("head.weight", w);
  m.add_param("head.bias", bias);
  m.layers_.push_back({"head", LayerKind::Linear});
  return m;
}

Model fuse_metadata(const Model& src, const MetadataSpec& spec, std::uint64_t seed) {
  if (src.fused()) fail(Errc::AlreadyFused, "model already has a metadata head");
  Model m = src.clone();
  const std::size_t F = src.feature_width(), mw = spec.width(), K = src.config().num_classes;
  const Tensor& old = src.parameter("head.weight");
  Tensor w({F + mw, K});
  auto wd = w.data();
  std::copy(old.data().begin(), old.data().end(), wd.begin());
  const double bound = 1.0 / std::sqrt(static_cast<double>(F + mw));
  Rng rng(mix_seed(seed, 0x6d657461));
  for (std::size_t i = F * K; i < wd.size(); ++i) wd[i] = uniform(rng, -bound, bound);
  tensor::round_to_float(w);
  w.set_requires_grad(old.requires_grad());
  m.params_[m.param_index_.at("head.weight")].value = w;
  m.metadata_ = spec;
  return m;
}

Partition param_partition(const Model& m) {
  Partition p;
  for (const auto& t : m.parameters())
    (t.name.rfind("head.", 0) == 0 ? p.head : p.backbone).push_back(t.name);
  return p;
}

Tensor dense_block(const Model& m, Tape& tape, Tensor x, std::size_t block, NormMode mode) {
  if (block == 0 || block > m.config().block_layers.size())
    fail(Errc::ConfigInvalid, "no dense block " + std::to_string(block));
  ForwardOptions o;
  o.mode = mode;
  Runner r(m, tape, o);
  return r.block(x, block);
}

Tensor transition(const Model& m, Tape& tape, Tensor x, std::size_t index, NormMode mode) {
  if (index == 0 || index >= m.config().block_layers.size())
    fail(Errc::ConfigInvalid, "no transition " + std::to_string(index));
  ForwardOptions o;
  o.mode = mode;
  Runner r(m, tape, o);
  return r.trans(x, index);
}

ForwardOutput forward(const Model& m, Tape& tape, Tensor batch, Tensor metadata,
                      const ForwardOptions& options) {
  const auto& cfg = m.config();
  Shape expected{cfg.in_channels};
  expected.insert(expected.end(), cfg.input_shape.begin(), cfg.input_shape.end());
  if (batch.rank() != expected.size() + 1 || !std::equal(expected.begin(), expected.end(), batch.shape().begin() + 1))
    fail(Errc::ShapeMismatch, "batch " + tensor::to_string(batch.shape()) + " does not match [N," +
                                  tensor::to_string(expected).substr(1));
  if (m.fused() && !metadata.defined()) fail(Errc::MetadataMissing, "fused model needs a metadata batch");
  if (!m.fused() && metadata.defined()) fail(Errc::ShapeMismatch, "image-only model given metadata");
  if (metadata.defined() &&
      (metadata.rank() != 2 || metadata.dim(0) != batch.dim(0) || metadata.dim(1) != m.metadata_width()))
    fail(Errc::ShapeMismatch, "metadata " + tensor::to_string(metadata.shape()) + " does not match the batch");
  check_capture(m, options.capture);

  Runner r(m, tape, options);
  Tensor h = r.conv("stem.conv", batch, 2, 3);
  tensor::BatchNormState st{m.buffer("stem.bn.running_mean"), m.buffer("stem.bn.running_var")};
  h = tensor::batch_norm(tape, h, m.parameter("stem.bn.gamma"), m.parameter("stem.bn.beta"), st, options.mode);
  h = tensor::relu(tape, h);
  h = tensor::max_pool(tape, h, 3, 2, 1);
  const std::size_t B = cfg.block_layers.size();
  for (std::size_t b = 1; b <= B; ++b) {
    h = r.block(h, b);
    if (b < B) h = r.trans(h, b);
  }
  h = r.bn_relu("final.bn", h);
  if (options.capture == kFeatureMap) r.captured = h;

  ForwardOutput out;
  out.features = tensor::global_avg_pool(tape, h);
  Tensor head_in = metadata.defined() ? tensor::concat_features(tape, out.features, metadata) : out.features;
  out.logits = tensor::linear(tape, head_in, m.parameter("head.weight"), m.parameter("head.bias"));
  out.probs = tensor::softmax(tape, out.logits);
  out.captured = r.captured;
  return out;
}

Tensor predict(const Model& m, Tensor batch, Tensor metadata) {
  Tape tape = Tape::inference();
  return forward(m, tape, batch, metadata).probs;
}

}  // namespace sahnet::net
