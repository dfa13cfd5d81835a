#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "sahnet/error.hpp"
#include "sahnet/explain/gradcam.hpp"
#include "sahnet/net/densenet.hpp"
#include "sahnet/random.hpp"
#include "sahnet/volio/nifti.hpp"

using namespace sahnet;
using namespace sahnet::explain;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Usage;
}

// Two feature maps of mixed sign on a 4x5x6 grid.
Tensor feature_maps(std::uint64_t seed) {
  Rng rng(seed);
  Tensor a({1, 2, 4, 5, 6}, true);
  for (double& v : a.data()) v = 2 * uniform01(rng) - 1;
  return a;
}

// Logit = c * spatial sum of channel 0; channel 1 is ignored.
std::function<CamGraph(Tape&)> readout(const Tensor& leaf, double c) {
  return [leaf, c](Tape& t) {
    const Tensor act = tensor::scale(t, leaf, 1.0);
    const Tensor score = tensor::scale(t, tensor::sum(t, tensor::slice_channels(t, act, 0, 1)), c);
    return CamGraph{act, score};
  };
}

}  // namespace

TEST_CASE("linear readout gives the rectified feature map") {
  const Spatial shape{4, 5, 6};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = feature_maps(seed);
    const auto s = grad_cam(readout(a, 1.0), shape, 1, "toy");
    REQUIRE(s.values.size() == shape.count());
    CHECK(s.source_layer == "toy");
    CHECK(s.target_class == 1);
    CHECK_FALSE(s.all_zero);
    double peak = 0;
    for (std::size_t i = 0; i < shape.count(); ++i) peak = std::max(peak, a.data()[i]);
    CHECK(s.raw_max == doctest::Approx(peak).epsilon(1e-12));
    for (std::size_t i = 0; i < shape.count(); ++i) {
      CHECK(std::abs(s.values[i] - std::max(0.0, a.data()[i]) / peak) < 1e-10);
      CHECK(s.values[i] >= 0.0);
      CHECK(s.values[i] <= 1.0);
    }
    // readout weight scale moves the raw map, not the normalized one
    const auto scaled = grad_cam(readout(a, 3.5), shape, 1);
    CHECK(scaled.raw_max == doctest::Approx(3.5 * s.raw_max).epsilon(1e-12));
    for (std::size_t i = 0; i < shape.count(); ++i) CHECK(std::abs(scaled.values[i] - s.values[i]) < 1e-10);
    // opposite readout weights light up disjoint voxels
    const auto neg = grad_cam(readout(a, -1.0), shape, 0);
    for (std::size_t i = 0; i < shape.count(); ++i) CHECK(std::min(neg.values[i], s.values[i]) == 0.0);
    for (std::size_t i = 0; i < shape.count(); ++i)
      if (a.data()[i] < 0) CHECK(neg.values[i] > 0.0);
  }
}

TEST_CASE("cam map of a non-positive combination is all zero") {
  Tensor a({1, 2, 4, 5, 6}, true);
  for (double& v : a.data()) v = 0.5;
  const auto s = grad_cam(readout(a, -2.0), {4, 5, 6}, 1);
  CHECK(s.all_zero);
  CHECK(s.raw_max == 0.0);
  CHECK(top_decile(s).empty());
  for (double v : s.values) CHECK(v == 0.0);
  std::vector<double> g(a.data().size(), 0.0);
  for (double v : cam_map(a, g)) CHECK(v == 0.0);
}

TEST_CASE("cam map weights channels by mean gradient") {
  Tensor a({1, 2, 1, 1, 2});
  a.data()[0] = 1, a.data()[1] = 2, a.data()[2] = 3, a.data()[3] = -4;
  // alpha = (0.5, 1)
  const std::vector<double> g{0.0, 1.0, 1.0, 1.0};
  const auto m = cam_map(a, g);
  CHECK(m[0] == doctest::Approx(0.5 * 1 + 3));
  CHECK(m[1] == 0.0);
}

TEST_CASE("upsample") {
  const std::vector<double> two{0.0, 1.0};
  const auto four = upsample(two, {1, 1, 2}, {1, 1, 4});
  CHECK(four[0] == doctest::Approx(0.0));
  CHECK(four[1] == doctest::Approx(0.25));
  CHECK(four[2] == doctest::Approx(0.75));
  CHECK(four[3] == doctest::Approx(1.0));
  Rng rng(3);
  std::vector<double> v(2 * 3 * 4);
  for (double& x : v) x = uniform01(rng);
  CHECK(upsample(v, {2, 3, 4}, {2, 3, 4}) == v);
  const auto big = upsample(std::vector<double>(24, 0.7), {2, 3, 4}, {5, 7, 9});
  REQUIRE(big.size() == 315);
  for (double x : big) CHECK(x == doctest::Approx(0.7));
  const auto up = upsample(v, {2, 3, 4}, {6, 9, 11});
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  for (double x : up) {
    CHECK(x >= *lo - 1e-12);
    CHECK(x <= *hi + 1e-12);
  }
}

TEST_CASE("top decile and centroid") {
  Saliency s;
  s.shape = {1, 2, 5};
  s.values = {0, 0.2, 0.95, 1.0, 0, 0, 0, 0, 0.9, 0.5};
  CHECK(top_decile(s) == std::vector<std::size_t>{2, 3, 8});
  const auto c = top_decile_centroid(s);
  CHECK(c[0] == doctest::Approx((2 + 3 + 3) / 3.0));
  CHECK(c[1] == doctest::Approx(1 / 3.0));
  CHECK(c[2] == 0.0);
  CHECK(top_decile(s, 0.5).size() == 4);
}

TEST_CASE("grad-cam on the tiny network") {
  auto cfg = net::DenseNetConfig::tiny();
  cfg.input_shape = {16, 16, 16};
  const auto m = net::build(cfg, 3);
  Rng rng(8);
  Tensor img({1, 16, 16, 16});
  for (double& v : img.data()) v = uniform01(rng);
  for (int cls : {0, 1}) {
    const auto s = grad_cam(m, img, cls);
    CHECK(s.source_layer == "features");
    CHECK(s.shape.d == 16);
    CHECK(s.shape.w == 16);
    CHECK(s.values.size() == 4096);
    for (double v : s.values) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    if (!s.all_zero) CHECK(*std::max_element(s.values.begin(), s.values.end()) == doctest::Approx(1.0));
  }
  // grad-cam leaves the model untouched and is repeatable
  CHECK(grad_cam(m, img, 1).values == grad_cam(m, img, 1).values);
  for (const auto& p : m.parameters()) CHECK_FALSE(p.value.has_grad());
  CHECK(grad_cam(m, img, 1, m.last_conv_layer()).source_layer == "block2.layer2.conv2");
  const auto stem = grad_cam(m, img, 1, "stem.conv");
  CHECK(stem.source_layer == "stem.conv");
  CHECK(code_of([&] { grad_cam(m, img, 1, "block9.conv"); }) == Errc::UnknownLayer);
  CHECK(code_of([&] { grad_cam(m, img, 1, "stem.bn"); }) == Errc::NotConvolutional);
  CHECK(code_of([&] { grad_cam(m, Tensor({1, 8, 8, 8}), 1); }) == Errc::ShapeMismatch);

  auto flat = cfg;
  flat.spatial_dims = 2;
  flat.input_shape = {16, 16};
  const auto m2 = net::build(flat, 1);
  Tensor slice({1, 16, 16});
  for (double& v : slice.data()) v = uniform01(rng);
  const auto s2 = grad_cam(m2, slice, 1);
  CHECK(s2.shape.d == 1);
  CHECK(s2.values.size() == 256);
}

TEST_CASE("default target reduces to head weights times the feature map") {
  for (int dims : {3, 2}) {
    auto cfg = net::DenseNetConfig::tiny();
    cfg.spatial_dims = dims;
    cfg.input_shape.assign(dims, 16);
    const auto m = net::build(cfg, 11);
    Rng rng(4);
    tensor::Shape xs{1};
    xs.insert(xs.end(), cfg.input_shape.begin(), cfg.input_shape.end());
    Tensor img(xs);
    for (double& v : img.data()) v = uniform01(rng);
    tensor::Shape bs{1};
    bs.insert(bs.end(), xs.begin(), xs.end());
    Tensor batch(bs);
    std::copy(img.data().begin(), img.data().end(), batch.data().begin());
    auto tape = Tape::inference();
    net::ForwardOptions o;
    o.capture = std::string(net::kFeatureMap);
    const auto a = net::forward(m, tape, batch, {}, o).captured;
    const std::size_t k_count = a.dim(1), n = a.numel() / k_count;
    const auto w = m.parameter("head.weight").data();
    for (int cls : {0, 1}) {
      std::vector<double> cam(n, 0.0);
      for (std::size_t k = 0; k < k_count; ++k)
        for (std::size_t i = 0; i < n; ++i) cam[i] += w[k * 2 + cls] * a.data()[k * n + i];
      for (double& v : cam) v = std::max(v, 0.0);
      auto up = upsample(cam, tensor::spatial_of(a), tensor::spatial_of(batch));
      const double peak = *std::max_element(up.begin(), up.end());
      const auto s = grad_cam(m, img, cls);
      REQUIRE(s.values.size() == up.size());
      if (peak == 0.0) {
        CHECK(s.all_zero);
        continue;
      }
      double err = 0;
      for (std::size_t i = 0; i < up.size(); ++i) err = std::max(err, std::abs(s.values[i] - up[i] / peak));
      CHECK(err < 1e-10);
    }
  }
}

TEST_CASE("overlay export") {
  volio::Mat4 aff = volio::Mat4::identity();
  aff(0, 0) = -2, aff(1, 1) = 2, aff(2, 2) = 3, aff(0, 3) = 40, aff(1, 3) = -10;
  const volio::Volume ref(volio::Shape3{6, 5, 4}, aff, std::vector<float>(120, 7.0f));
  Saliency s;
  s.shape = {4, 5, 6};
  Rng rng(1);
  for (int i = 0; i < 120; ++i) s.values.push_back(uniform01(rng));
  const auto dir = std::filesystem::temp_directory_path() / "sahnet_overlay_test";
  std::filesystem::remove_all(dir);
  export_overlay(s, ref, dir / "map.nii");
  const auto back = volio::read_nifti_file(dir / "map.nii");
  CHECK(back.affine() == ref.affine());
  for (std::size_t i = 0; i < 120; ++i) CHECK(back.data()[i] == static_cast<float>(s.values[i]));

  Saliency zero = s;
  std::fill(zero.values.begin(), zero.values.end(), 0.0);
  zero.all_zero = true;
  export_overlay(zero, ref, dir / "zero.nii");
  const auto zero_back = volio::read_nifti_file(dir / "zero.nii");
  for (float v : zero_back.data()) CHECK(v == 0.0f);

  s.shape = {4, 6, 5};
  CHECK(code_of([&] { export_overlay(s, ref, dir / "bad.nii"); }) == Errc::ShapeMismatch);
  std::filesystem::remove_all(dir);
}
