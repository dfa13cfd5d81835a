#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include "callback_oracle.hpp"
#include "doctest.h"
#include "json.hpp"
#include "sahnet/error.hpp"
#include "sahnet/net/convert.hpp"
#include "sahnet/net/densenet.hpp"
#include "sahnet/random.hpp"
#include "sahnet/train/augment.hpp"
#include "sahnet/train/callbacks.hpp"
#include "sahnet/train/checkpoint.hpp"
#include "sahnet/train/fit.hpp"
#include "sahnet/train/loss.hpp"
#include "sahnet/train/optimizer.hpp"

using namespace sahnet;
using namespace sahnet::train;
using tensor::Tape;
using tensor::Tensor;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Usage;
}

double loss_of(const std::vector<double>& probs, const std::vector<int>& y, const std::vector<double>& w,
               double gamma) {
  Tape t;
  Tensor p({y.size(), 2}, probs);
  return focal_loss(t, p, y, w, gamma).item();
}

Grid3 random_grid(std::size_t nx, std::size_t ny, std::size_t nz, std::uint64_t seed) {
  Grid3 g{nx, ny, nz, {}};
  Rng rng(seed);
  g.values.resize(g.size());
  for (double& v : g.values) v = uniform01(rng);
  return g;
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool same_model(const net::Model& a, const net::Model& b) {
  if (a.parameters().size() != b.parameters().size()) return false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i)
    if (!same_bits(a.parameters()[i].value.data(), b.parameters()[i].value.data())) return false;
  for (std::size_t i = 0; i < a.buffers().size(); ++i)
    if (!same_bits(a.buffers()[i].value.data(), b.buffers()[i].value.data())) return false;
  return true;
}

// Dead subjects carry a bright cube; enough signal to learn in a few epochs.
Dataset blob_dataset(std::size_t n, std::uint64_t seed) {
  Dataset d;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.id = "s" + std::to_string(i);
    s.label = static_cast<int>(i % 2);
    s.image = Tensor({1, 16, 16, 16});
    auto v = s.image.data();
    for (double& x : v) x = 0.1 * uniform01(rng);
    if (s.label == 1)
      for (std::size_t z = 5; z < 11; ++z)
        for (std::size_t y = 5; y < 11; ++y)
          for (std::size_t x = 5; x < 11; ++x) v[x + 16 * (y + 16 * z)] += 0.8;
    d.samples.push_back(std::move(s));
  }
  return d;
}

net::Model tiny16(std::uint64_t seed) {
  auto cfg = net::DenseNetConfig::tiny();
  cfg.input_shape = {16, 16, 16};
  return net::build(cfg, seed);
}

TrainConfig quick_config() {
  TrainConfig c;
  c.epochs = 4;
  c.freeze_epochs = 2;
  c.batch_size = 4;
  c.lr_phase1 = 0.01;
  c.lr_phase2 = 0.001;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("class weights") {
  CHECK(compute_class_weights({0, 1, 0, 1}, 2, ClassWeightMode::Balanced) == std::vector<double>{1.0, 1.0});
  std::vector<int> labels(125, 0);
  labels.resize(175, 1);
  const auto w = compute_class_weights(labels, 2, ClassWeightMode::Balanced);
  CHECK(w[0] == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(1.75).epsilon(1e-15));
  auto twice = labels;
  twice.insert(twice.end(), labels.begin(), labels.end());
  CHECK(compute_class_weights(twice, 2, ClassWeightMode::Balanced) == w);
  CHECK(compute_class_weights(labels, 2, ClassWeightMode::None) == std::vector<double>{1.0, 1.0});
  CHECK(compute_class_weights(labels, 2, ClassWeightMode::Explicit, {0.3, 2}) == std::vector<double>{0.3, 2});
  CHECK(code_of([] { compute_class_weights({0, 0, 0}, 2, ClassWeightMode::Balanced); }) == Errc::MissingClass);
  CHECK(code_of([&] { compute_class_weights(labels, 2, ClassWeightMode::Explicit, {1}); }) == Errc::ConfigInvalid);
}

TEST_CASE("focal loss values") {
  CHECK(loss_of({0.1, 0.9}, {1}, {1, 1}, 2.0) == doctest::Approx(0.01 * -std::log(0.9)).epsilon(1e-14));
  CHECK(loss_of({0.1, 0.9}, {1}, {1, 1}, 2.0) == doctest::Approx(0.00105360515657826).epsilon(1e-12));
  CHECK(loss_of({0.0, 1.0}, {1}, {1, 1}, 2.0) < 1e-20);
  CHECK(loss_of({0.0, 1.0}, {1}, {1, 1}, 0.0) < 1e-6);
  // p clamped before the log
  CHECK(std::isfinite(loss_of({1.0, 0.0}, {1}, {1, 1}, 2.0)));
  CHECK(loss_of({1.0, 0.0}, {1}, {1, 1}, 0.0) == doctest::Approx(-std::log(1e-7)));
  // batch mean, weighted by the true class
  CHECK(loss_of({0.8, 0.2, 0.3, 0.7}, {0, 1}, {0.7, 1.75}, 0.0) ==
        doctest::Approx(0.5 * (-0.7 * std::log(0.8) - 1.75 * std::log(0.7))).epsilon(1e-14));
  Tape t;
  CHECK(code_of([&] { focal_loss(t, Tensor({2, 2}), {0}, {1, 1}, 2.0); }) == Errc::ShapeMismatch);
}

TEST_CASE("focal loss properties") {
  Rng rng(17);
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 1; i < 1000; ++i) {
    const double p = i / 1000.0;
    // gamma 0 is cross-entropy
    CHECK(loss_of({1 - p, p}, {1}, {1, 1}, 0.0) == doctest::Approx(-std::log(p)).epsilon(1e-14));
    const double g = 3 * uniform01(rng);
    CHECK(focal_term(p, g) == doctest::Approx(std::pow(1 - p, g) * -std::log(p)));
    const double l = focal_term(p, 2.0);
    CHECK(l < prev);
    prev = l;
  }
}

TEST_CASE("adam") {
  auto m = tiny16(1);
  const auto before = m.clone();
  Adam opt;
  opt.attach(m);
  for (const auto& p : m.parameters()) {
    Tensor t = p.value;
    t.zero_grad();
    for (double& g : t.grad()) g = 0.5;
  }
  SUBCASE("zero learning rate changes nothing") {
    opt.step(m, m.parameter_names(), 0.0);
    CHECK(same_model(m, before));
    CHECK(opt.steps() == 1);
  }
  SUBCASE("first step moves by lr against the gradient sign") {
    const std::string name = m.parameters().front().name;
    opt.step(m, {name}, 1e-3);
    const auto a = before.parameter(name).data();
    const auto b = m.parameter(name).data();
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(b[i] == doctest::Approx(static_cast<float>(a[i] - 1e-3)).epsilon(1e-6));
    // float32 rounding keeps checkpoints lossless
    for (double v : b) CHECK(static_cast<double>(static_cast<float>(v)) == v);
    // untouched names stay put
    const auto& other = m.parameters().back().name;
    CHECK(same_bits(before.parameter(other).data(), m.parameter(other).data()));
  }
}

TEST_CASE("augmentation") {
  const auto g = random_grid(9, 8, 7, 1);
  SUBCASE("disabled is identity") {
    CHECK(augment_sample(g, 42, AugConfig::none()).values == g.values);
  }
  SUBCASE("mirror is an involution") {
    for (std::size_t axis = 0; axis < 3; ++axis) {
      CHECK(mirror(g, axis).values != g.values);
      CHECK(mirror(mirror(g, axis), axis).values == g.values);
    }
    const auto m = mirror(g, 0);
    CHECK(m.values[m.index(0, 2, 3)] == g.values[g.index(8, 2, 3)]);
  }
  SUBCASE("per-sample seed determinism") {
    AugConfig c;
    c.elastic.enabled = true;
    const auto a = augment_sample(g, 7, c);
    CHECK(a.values.size() == g.values.size());
    (void)augment_sample(g, 8, c);
    CHECK(augment_sample(g, 7, c).values == a.values);
    CHECK(augment_sample(g, 9, c).values != a.values);
  }
  SUBCASE("elastic with zero alpha is identity") {
    auto c = AugConfig::none();
    c.elastic.enabled = true;
    c.elastic.alpha = 0;
    CHECK(augment_sample(g, 3, c).values == g.values);
    for (double v : elastic_field(5, 5, 5, 0.0, 2.0, 1)) CHECK(v == 0.0);
  }
  SUBCASE("validation") {
    AugConfig c;
    c.scale_min = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.elastic.enabled = true;
    c.elastic.sigma = 0;
    CHECK_THROWS_AS(c.validate(), Error);
  }
}

TEST_CASE("elastic field") {
  const std::size_t n = 10;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = elastic_field(n, n, n, 2.5, 2.0, seed);
    REQUIRE(f.size() == 3 * n * n * n);
    double peak = 0;
    for (std::size_t i = 0; i < n * n * n; ++i)
      peak = std::max(peak, std::hypot(f[3 * i], f[3 * i + 1], f[3 * i + 2]));
    CHECK(peak <= 2.5 + 1e-12);
    CHECK(peak == doctest::Approx(2.5));
  }
  // smoother with growing sigma: adjacent differences along x shrink
  auto roughness = [&](double sigma) {
    const auto f = elastic_field(n, n, n, 1.0, sigma, 11);
    double s = 0;
    std::size_t k = 0;
    for (std::size_t z = 0; z < n; ++z)
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x + 1 < n; ++x)
          for (std::size_t c = 0; c < 3; ++c) {
            const std::size_t i = x + n * (y + n * z), j = i + 1;
            s += std::pow(f[3 * i + c] - f[3 * j + c], 2);
            ++k;
          }
    return s / static_cast<double>(k);
  };
  const double r1 = roughness(1), r2 = roughness(2), r4 = roughness(4);
  CHECK(r1 > r2);
  CHECK(r2 > r4);
  // very wide smoothing leaves an almost constant shift
  const auto wide = elastic_field(6, 6, 6, 1.0, 1e4, 5);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 1; i < 216; ++i) CHECK(std::abs(wide[3 * i + c] - wide[c]) < 1e-3);
}

TEST_CASE("early stopping") {
  CHECK_FALSE(early_stop({1.0, 0.9, 0.8, 0.7, 0.6}, "val_loss", 1, 0));
  CHECK_FALSE(early_stop({0.5, 0.6, 0.7, 0.8}, "val_auc", 1, 0));
  CHECK_FALSE(early_stop({1.0, 0.9, 0.91, 0.92}, "val_loss", 3, 0));
  CHECK(early_stop({1.0, 0.9, 0.91, 0.92, 0.93}, "val_loss", 3, 0));
  // improvements smaller than min_delta do not count
  CHECK(early_stop({1.0, 0.99, 0.98, 0.97}, "val_loss", 3, 0.05));
  CHECK_FALSE(early_stop({1.0, 0.99, 0.98, 0.97}, "val_loss", 3, 0.0));
  CHECK(code_of([] { early_stop({1.0}, "val_rmse", 3, 0); }) == Errc::UnknownMonitor);
  CHECK(code_of([] { parse_monitor("accuracy"); }) == Errc::UnknownMonitor);
  CHECK(lower_is_better(Monitor::TrainLoss));
  CHECK_FALSE(lower_is_better(Monitor::ValF1));
}

TEST_CASE("plateau") {
  PlateauConfig c;
  c.patience = 2;
  c.factor = 0.1;
  c.min_lr = 1e-6;
  CHECK(plateau_lr({1.0, 0.9, 0.8}, 1e-3, c) == 1e-3);
  CHECK(plateau_lr({1.0, 1.0, 1.0}, 1e-3, c) == doctest::Approx(1e-4));
  // counter resets after a reduction
  CHECK(plateau_lr({1.0, 1.0, 1.0, 1.0}, 1e-3, c) == doctest::Approx(1e-4));
  CHECK(plateau_lr({1.0, 1.0, 1.0, 1.0, 1.0}, 1e-3, c) == doctest::Approx(1e-5));
  CHECK(plateau_lr(std::vector<double>(20, 1.0), 1e-3, c) == 1e-6);
  CHECK(plateau_lr({1.0, 1.0, 1.0}, 1e-6, c) == 1e-6);
  c.factor = 1.0;
  CHECK(code_of([&] { plateau_lr({1.0}, 1e-3, c); }) == Errc::ConfigInvalid);
  c.factor = 0.5;
  c.monitor = "bogus";
  CHECK(code_of([&] { plateau_lr({1.0}, 1e-3, c); }) == Errc::UnknownMonitor);
}

TEST_CASE("stratified split") {
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) labels.push_back(i < 45 ? 0 : 1);
  const auto [tr, va] = stratified_split(labels, 0.2, 9);
  CHECK(tr.size() + va.size() == 60);
  CHECK(std::count_if(va.begin(), va.end(), [&](auto i) { return labels[i] == 1; }) == 3);
  CHECK(std::count_if(va.begin(), va.end(), [&](auto i) { return labels[i] == 0; }) == 9);
  std::vector<std::size_t> all(tr);
  all.insert(all.end(), va.begin(), va.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 60; ++i) CHECK(all[i] == i);
  CHECK(stratified_split(labels, 0.2, 9) == std::make_pair(tr, va));
  CHECK(stratified_split(labels, 0.2, 10) != std::make_pair(tr, va));
  CHECK(code_of([&] { stratified_split(labels, 1.0, 1); }) == Errc::ConfigInvalid);
}

TEST_CASE("checkpoint roundtrip") {
  auto m = tiny16(4);
  Adam opt;
  opt.attach(m);
  Rng rng(2);
  for (int step = 0; step < 2; ++step) {
    for (const auto& p : m.parameters()) {
      Tensor t = p.value;
      t.zero_grad();
      for (double& g : t.grad()) g = uniform01(rng) - 0.5;
    }
    opt.step(m, m.parameter_names(), 1e-2);
  }
  for (const auto& b : m.buffers()) {
    auto d = b.value;
    for (double& v : d.data()) v = uniform01(rng) + 0.1;
  }
  const CheckpointMeta meta{7, 2, 1e-4, "val_auc", 0.8125, 99};
  const auto enc = encode_checkpoint(m, &opt, meta);
  CHECK(manifest_tensor_count(enc.manifest) == 3 * m.parameters().size() + m.buffers().size());
  CHECK(enc.manifest.find("tensor param/stem.conv.weight 8x1x7x7x7 f32 0 10976") != std::string::npos);

  const auto back = decode_checkpoint(enc.manifest, enc.blob);
  CHECK(same_model(back.model, m));
  CHECK(back.optimizer.steps() == 2);
  for (const auto& p : m.parameters()) {
    CHECK(same_bits(back.optimizer.first_moments().at(p.name).data(), opt.first_moments().at(p.name).data()));
    CHECK(same_bits(back.optimizer.second_moments().at(p.name).data(), opt.second_moments().at(p.name).data()));
  }
  CHECK(back.meta.epoch == 7);
  CHECK(back.meta.phase == 2);
  CHECK(back.meta.lr == 1e-4);
  CHECK(back.meta.monitor == "val_auc");
  CHECK(back.meta.best_metric == 0.8125);
  CHECK(back.meta.seed == 99);

  Tensor x({2, 1, 16, 16, 16});
  for (double& v : x.data()) v = uniform01(rng);
  CHECK(same_bits(net::predict(m, x).data(), net::predict(back.model, x).data()));

  const auto dir = std::filesystem::temp_directory_path() / "sahnet_ckpt_test";
  std::filesystem::remove_all(dir);
  save_checkpoint(dir / "best", enc);
  CHECK(std::filesystem::exists(dir / "best.manifest"));
  CHECK(same_model(load_checkpoint(dir / "best.blob").model, m));
  CHECK(same_model(load_checkpoint(dir / "best").model, m));
  std::filesystem::remove_all(dir);

  const auto bare = encode_checkpoint(m, nullptr, meta);
  CHECK(manifest_tensor_count(bare.manifest) == m.parameters().size() + m.buffers().size());
  CHECK(same_model(decode_checkpoint(bare.manifest, bare.blob).model, m));
}

TEST_CASE("checkpoint of a fused model keeps the metadata statistics") {
  net::MetadataSpec spec;
  net::MetadataRow mean{}, sd{};
  for (std::size_t j = 0; j < net::kMetadataFields; ++j) mean[j] = j, sd[j] = 1 + j;
  spec.set_stats(mean, sd);
  const auto m = net::fuse_metadata(tiny16(1), spec, 2);
  const auto enc = encode_checkpoint(m, nullptr, {});
  const auto back = decode_checkpoint(enc.manifest, enc.blob);
  REQUIRE(back.model.fused());
  Tensor x({2, 1, 16, 16, 16});
  for (double& v : x.data()) v = 0.25;
  std::vector<net::MetadataRow> rows(2);
  rows[0][0] = 60, rows[1][0] = 40, rows[1][1] = 1;
  const auto md = spec.to_tensor(rows);
  CHECK(same_bits(net::predict(m, x, md).data(), net::predict(back.model, x, md).data()));
}

TEST_CASE("checkpoint corruption") {
  const auto m = tiny16(2);
  const auto enc = encode_checkpoint(m, nullptr, {});
  auto blob = enc.blob;
  blob.pop_back();
  CHECK(code_of([&] { decode_checkpoint(enc.manifest, blob); }) == Errc::BlobLengthMismatch);
  blob = enc.blob;
  blob.push_back(0);
  CHECK(code_of([&] { decode_checkpoint(enc.manifest, blob); }) == Errc::BlobLengthMismatch);

  auto edit = [&](const std::string& from, const std::string& to) {
    auto s = enc.manifest;
    const auto at = s.find(from);
    REQUIRE(at != std::string::npos);
    s.replace(at, from.size(), to);
    return code_of([&] { decode_checkpoint(s, enc.blob); });
  };
  CHECK(edit("sahnet-checkpoint 1", "nonsense") == Errc::ManifestCorrupt);
  CHECK(edit("end\n", "") == Errc::ManifestCorrupt);
  CHECK(edit("param/stem.conv.weight", "param/stem.conv.kernel") == Errc::UnknownTensorName);
  CHECK(edit("param/stem.conv.weight", "weights/stem.conv.weight") == Errc::UnknownTensorName);
  CHECK(edit("f32 0 10976", "f32 4 10976") == Errc::ManifestCorrupt);
  CHECK(edit("f32 0 10976", "f32 0 10972") == Errc::ManifestCorrupt);
  CHECK(edit("epoch 0", "epoch x") == Errc::ManifestCorrupt);
  CHECK(edit("model.growth_rate 4", "model.growth_rate 0") == Errc::ManifestCorrupt);
  CHECK(code_of([&] { decode_checkpoint("", enc.blob); }) == Errc::ManifestCorrupt);
  CHECK(code_of([] { load_checkpoint("/nonexistent/ckpt"); }) == Errc::IoFailure);
}

TEST_CASE("fit freezes the backbone in phase one and is deterministic") {
  const auto data = blob_dataset(24, 1);
  const auto [tr, va] = stratified_split(data.labels(), 0.25, 1);
  const auto train = subset(data, tr), val = subset(data, va);
  const auto cfg = quick_config();

  auto m = tiny16(5);
  const auto initial = m.clone();
  const auto part = net::param_partition(m);
  std::vector<int> phases;
  std::size_t frozen_ok = 0, head_moved = 0;
  auto r1 = fit(m, train, val, cfg, [&](const EpochRecord& e, const net::Model& now) {
    phases.push_back(e.phase);
    if (e.phase != 1) return;
    bool same = true;
    for (const auto& n : part.backbone) same = same && same_bits(now.parameter(n).data(), initial.parameter(n).data());
    frozen_ok += same;
    bool moved = false;
    for (const auto& n : part.head) moved = moved || !same_bits(now.parameter(n).data(), initial.parameter(n).data());
    head_moved += moved;
  });
  CHECK(phases == std::vector<int>{1, 1, 2, 2});
  CHECK(frozen_ok == 2);
  CHECK(head_moved == 2);
  bool backbone_moved = false;
  for (const auto& n : part.backbone) backbone_moved |= !same_bits(m.parameter(n).data(), initial.parameter(n).data());
  CHECK(backbone_moved);

  const auto& h = r1.history.epochs;
  REQUIRE(h.size() == 4);
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(h[i].epoch == i + 1);
  CHECK(h[0].lr == cfg.lr_phase1);
  CHECK(h[2].lr == cfg.lr_phase2);
  for (const char* k : {"best", "last", "best_auc", "best_f1", "best_loss"}) CHECK(r1.checkpoints.contains(k));

  // the best snapshot dominates every epoch
  const auto best_auc = decode_checkpoint(r1.checkpoints.at("best_auc").manifest, r1.checkpoints.at("best_auc").blob);
  const auto best_loss = decode_checkpoint(r1.checkpoints.at("best_loss").manifest, r1.checkpoints.at("best_loss").blob);
  for (const auto& e : h) {
    CHECK(best_auc.meta.best_metric >= e.val_auc);
    CHECK(best_loss.meta.best_metric <= e.val_loss);
  }
  // last snapshot reproduces the final model bitwise
  const auto last = decode_checkpoint(r1.checkpoints.at("last").manifest, r1.checkpoints.at("last").blob);
  CHECK(same_model(last.model, m));
  CHECK(last.meta.epoch == 4);

  auto m2 = tiny16(5);
  const auto r2 = fit(m2, train, val, cfg);
  CHECK(r2.history.to_csv() == r1.history.to_csv());
  CHECK(same_model(m2, m));
  for (const auto& [k, v] : r1.checkpoints) {
    CHECK(r2.checkpoints.at(k).manifest == v.manifest);
    CHECK(r2.checkpoints.at(k).blob == v.blob);
  }
}

TEST_CASE("fit writes checkpoint files and stops early") {
  const auto data = blob_dataset(16, 2);
  const auto [tr, va] = stratified_split(data.labels(), 0.25, 2);
  auto cfg = quick_config();
  cfg.epochs = 6;
  cfg.freeze_epochs = 1;
  cfg.early_stop = {"train_loss", 1, 1e9};
  cfg.checkpoint_dir = std::filesystem::temp_directory_path() / "sahnet_fit_test";
  std::filesystem::remove_all(cfg.checkpoint_dir);
  auto m = tiny16(6);
  const auto r = fit(m, subset(data, tr), subset(data, va), cfg);
  // phase-two counters start fresh at epoch 2, and patience 1 stops at epoch 3
  CHECK(r.stopped_early);
  CHECK(r.history.epochs.size() == 3);
  for (const char* k : {"best", "last", "best_auc", "best_f1", "best_loss"}) {
    CHECK(std::filesystem::exists(cfg.checkpoint_dir / (std::string(k) + ".manifest")));
    CHECK(std::filesystem::exists(cfg.checkpoint_dir / (std::string(k) + ".blob")));
  }
  CHECK(same_model(load_checkpoint(cfg.checkpoint_dir / "last").model, m));
  std::filesystem::remove_all(cfg.checkpoint_dir);
}

TEST_CASE("fit rejects bad inputs") {
  const auto data = blob_dataset(8, 3);
  auto m = tiny16(1);
  Dataset alive;
  for (const auto& s : data.samples)
    if (s.label == 0) alive.samples.push_back(s);
  CHECK(code_of([&] { fit(m, alive, data, quick_config()); }) == Errc::EmptyClass);
  CHECK(code_of([&] { fit(m, data, alive, quick_config()); }) == Errc::EmptyClass);
  auto cfg = quick_config();
  cfg.freeze_epochs = cfg.epochs;
  CHECK(code_of([&] { fit(m, data, data, cfg); }) == Errc::ConfigInvalid);
  cfg = quick_config();
  cfg.early_stop.patience = 0;
  CHECK(code_of([&] { fit(m, data, data, cfg); }) == Errc::ConfigInvalid);
  cfg = quick_config();
  cfg.checkpoint.monitor = "val_mystery";
  CHECK(code_of([&] { fit(m, data, data, cfg); }) == Errc::UnknownMonitor);
}

TEST_CASE("history export") {
  History h;
  h.epochs.push_back({1, 1, 0.01, 0.5, 0.6, 0.75, 0.5, 0.625, 3.5});
  h.epochs.push_back({2, 2, 0.001, 0.25, 0.3, 0.875, 0.75, 0.8125, 4.0});
  CHECK(h.to_csv() ==
        "epoch,phase,lr,train_loss,val_loss,val_auc,val_f1,val_accuracy\n"
        "1,1,0.01,0.5,0.59999999999999998,0.75,0.5,0.625\n"
        "2,2,0.001,0.25,0.29999999999999999,0.875,0.75,0.8125\n");
  CHECK(h.to_csv(true).find(",wall_time\n") != std::string::npos);
  const auto j = nlohmann::json::parse(h.to_json());
  REQUIRE(j["epochs"].size() == 2);
  CHECK(j["epochs"][1]["val_metrics"]["auc"] == 0.875);
  CHECK(j["epochs"][1]["phase"] == 2);
  CHECK_FALSE(j["epochs"][0].contains("wall_time"));
  CHECK(nlohmann::json::parse(h.to_json(true))["epochs"][0]["wall_time"] == 3.5);
}

TEST_CASE("callbacks agree with a brute-force replay") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    CAPTURE(seed);
    const auto c = testing::random_callback_case(seed);
    CHECK(early_stop(c.history, c.monitor, c.patience, c.min_delta) ==
          testing::replay_early_stop(c.history, !c.lower, c.patience, c.min_delta));
    PlateauConfig p{c.monitor, c.factor, c.patience, c.min_lr, c.min_delta};
    CHECK(plateau_lr(c.history, c.lr, p) ==
          testing::replay_plateau(c.history, !c.lower, c.patience, c.min_delta, c.lr, c.factor, c.min_lr));
  }
}
