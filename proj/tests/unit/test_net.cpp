#include <cmath>

#include "doctest.h"
#include "net_gradcheck.hpp"
#include "sahnet/error.hpp"
#include "sahnet/net/convert.hpp"
#include "sahnet/net/densenet.hpp"
#include "sahnet/net/metadata.hpp"
#include "sahnet/random.hpp"
#include "sahnet/tensor/gradcheck.hpp"
#include "sahnet/train/loss.hpp"

using namespace sahnet;
using namespace sahnet::net;
using tensor::Shape;
using tensor::Tape;
using tensor::Tensor;

namespace {

Tensor random_batch(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(s));
  for (double& v : t.data()) v = uniform01(rng);
  return t;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Usage;
}

}  // namespace

TEST_CASE("densenet-121 channel arithmetic") {
  const auto cfg = DenseNetConfig::densenet121();
  CHECK(cfg.block_layers == std::vector<std::size_t>{6, 12, 24, 16});
  const auto m = build(cfg, 0);
  CHECK(m.channel_trace() == std::vector<std::size_t>{64, 256, 128, 512, 256, 1024, 512, 1024});
  CHECK(m.head_input_width() == 1024);
  const auto fused = fuse_metadata(m, MetadataSpec{}, 1);
  CHECK(fused.head_input_width() == 1032);
  CHECK(fused.parameter("head.weight").shape() == Shape{1032, 2});
}

TEST_CASE("tiny config") {
  const auto m = build(DenseNetConfig::tiny(), 3);
  CHECK(m.channel_trace() == std::vector<std::size_t>{8, 16, 8, 16});
  CHECK(m.last_conv_layer() == "block2.layer2.conv2");
  auto tape = Tape::inference();
  auto out = forward(m, tape, random_batch({2, 1, 32, 32, 32}, 1));
  CHECK(out.logits.shape() == Shape{2, 2});
  for (std::size_t n = 0; n < 2; ++n)
    CHECK(out.probs.data()[2 * n] + out.probs.data()[2 * n + 1] == doctest::Approx(1.0));
  // parameters are float32-representable
  for (const auto& p : m.parameters())
    for (double v : p.value.data()) CHECK(double(float(v)) == v);
}

TEST_CASE("config validation") {
  auto c = DenseNetConfig::tiny();
  c.compression = 0.0;
  CHECK(code_of([&] { c.validate(); }) == Errc::ConfigInvalid);
  c = DenseNetConfig::tiny();
  c.input_shape = {4, 4, 4};
  CHECK(code_of([&] { c.validate(); }) == Errc::ConfigInvalid);
  c = DenseNetConfig::tiny();
  c.spatial_dims = 4;
  CHECK(code_of([&] { c.validate(); }) == Errc::ConfigInvalid);
}

TEST_CASE("forward errors") {
  const auto m = build(DenseNetConfig::tiny(), 0);
  auto tape = Tape::inference();
  CHECK(code_of([&] { forward(m, tape, random_batch({1, 1, 16, 16, 16}, 0)); }) == Errc::ShapeMismatch);
  const auto fused = fuse_metadata(m, MetadataSpec{}, 0);
  CHECK(code_of([&] { forward(fused, tape, random_batch({1, 1, 32, 32, 32}, 0)); }) == Errc::MetadataMissing);
  CHECK(code_of([&] { fuse_metadata(fused, MetadataSpec{}, 0); }) == Errc::AlreadyFused);
  ForwardOptions o;
  o.capture = "block9.layer1.conv2";
  CHECK(code_of([&] { forward(m, tape, random_batch({1, 1, 32, 32, 32}, 0), {}, o); }) == Errc::UnknownLayer);
  o.capture = "stem.bn";
  CHECK(code_of([&] { forward(m, tape, random_batch({1, 1, 32, 32, 32}, 0), {}, o); }) == Errc::NotConvolutional);
  CHECK(code_of([&] { m.parameter("nope"); }) == Errc::UnknownTensorName);
  o.capture = std::string(kFeatureMap);
  const auto feats = forward(m, tape, random_batch({1, 1, 32, 32, 32}, 0), {}, o).captured;
  CHECK(feats.shape() == Shape{1, 16, 4, 4, 4});
  for (double v : feats.data()) CHECK(v >= 0.0);
}

TEST_CASE("fusing zero metadata leaves the image logits unchanged") {
  const auto m = build(DenseNetConfig::tiny(), 5);
  const auto fused = fuse_metadata(m, MetadataSpec{}, 9);
  const auto x = random_batch({2, 1, 32, 32, 32}, 2);
  const auto a = predict(m, x);
  const auto b = predict(fused, x, Tensor(Shape{2, kMetadataFields}));
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST_CASE("two-dimensional mode") {
  auto c = DenseNetConfig::tiny();
  c.spatial_dims = 2;
  c.input_shape = {32, 32};
  const auto m = build(c, 0);
  const auto p = predict(m, random_batch({3, 1, 32, 32}, 4));
  CHECK(p.shape() == Shape{3, 2});
}

TEST_CASE("clone is independent and trainability toggles") {
  auto m = build(DenseNetConfig::tiny(), 0);
  auto c = m.clone();
  auto bias = c.parameter("head.bias");
  bias.data()[0] += 1.0;
  CHECK(m.parameter("head.bias").data()[0] != c.parameter("head.bias").data()[0]);
  const auto part = param_partition(m);
  CHECK(part.head == std::vector<std::string>{"head.weight", "head.bias"});
  CHECK(part.backbone.size() + part.head.size() == m.parameters().size());
  m.set_trainable(part.backbone, false);
  CHECK_FALSE(m.parameter(part.backbone.front()).requires_grad());
  CHECK(m.parameter("head.weight").requires_grad());
}

TEST_CASE("metadata spec") {
  MetadataSpec s;
  CHECK(s.standardized(MetadataField::Age));
  CHECK(s.standardized(MetadataField::Wfns));
  CHECK_FALSE(s.standardized(MetadataField::Sex));
  std::vector<MetadataRow> rows{{40, 1, 0, 0, 0, 1, 1, 0}, {60, 0, 1, 1, 0, 3, 3, 1}, {80, 0, 1, 0, 1, 5, 5, 1}};
  s.fit(rows);
  CHECK(s.mean(MetadataField::Age) == doctest::Approx(60));
  CHECK(s.stddev(MetadataField::Age) == doctest::Approx(std::sqrt(800.0 / 3)));
  const auto t = s.transform(rows[2]);
  CHECK(t[0] == doctest::Approx(20 / std::sqrt(800.0 / 3)));
  CHECK(t[1] == 0.0);  // binary fields pass through
  CHECK_THROWS_AS(s.set_standardized(MetadataField::Sex, true), Error);
  CHECK(metadata_columns().size() == kMetadataFields);
}

TEST_CASE("volume to sample conversion") {
  const volio::Volume v(volio::Shape3{4, 3, 2}, volio::Mat4::identity(), std::vector<float>(24, 0.5f),
                        volio::IntensityUnit::Normalized);
  const auto s = volume_to_sample(v);
  CHECK(s.shape() == Shape{1, 2, 3, 4});
  CHECK_THROWS_AS(volume_to_sample(v, 2), Error);
  const auto batch = stack({s, s});
  CHECK(batch.shape() == Shape{2, 1, 2, 3, 4});
  CHECK(unstack(batch, 1).shape() == s.shape());
  const auto back = grid_to_volume(std::vector<double>(24, 0.25), v);
  CHECK(back.data()[5] == 0.25f);
}

TEST_CASE("gradient check through the whole tiny network") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    CAPTURE(seed);
    const auto r = testing::check_tiny_network(seed);
    CHECK(r.eval_error < 1e-4);
    CHECK(r.train_error < 1e-4);
    CHECK(r.coords > 0);
  }
  const auto flat = testing::check_tiny_network(5, true);
  CHECK(flat.eval_error < 1e-4);
  CHECK(flat.train_error < 1e-4);
}
