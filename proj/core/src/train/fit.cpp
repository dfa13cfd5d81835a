#include "sahnet/train/fit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include "json.hpp"

#include "sahnet/error.hpp"
#include "sahnet/eval/metrics.hpp"
#include "sahnet/eval/roc.hpp"
#include "sahnet/net/convert.hpp"

namespace sahnet::train {
namespace {

using tensor::Tensor;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Tensor metadata_batch(const net::Model& m, const Dataset& d, const std::vector<std::size_t>& idx) {
  if (!m.fused()) return {};
  std::vector<net::MetadataRow> rows;
  for (auto i : idx) rows.push_back(d.samples[i].metadata);
  return m.metadata_spec()->to_tensor(rows);
}

std::vector<std::vector<std::size_t>> batches(std::vector<std::size_t> order, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  // Batch norm needs two samples; fold a trailing singleton into its neighbour.
  if (out.size() > 1 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back()[0]);
    out.pop_back();
  }
  return out;
}

void require_both_classes(const Dataset& d, const char* which) {
  bool seen[2] = {false, false};
  for (const auto& s : d.samples) {
    if (s.label != 0 && s.label != 1) fail(Errc::UnknownClass, std::string(which) + " set has a label outside {0,1}");
    seen[s.label] = true;
  }
  if (!seen[0] || !seen[1]) fail(Errc::EmptyClass, std::string(which) + " set needs at least one sample per class");
}

}  // namespace

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(const std::vector<int>& labels,
                                                                               double val_fraction,
                                                                               std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) fail(Errc::ConfigInvalid, "validation fraction must be in (0, 1)");
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  std::vector<std::size_t> train, val;
  for (int c = 0; c <= max_label; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) idx.push_back(i);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(c), 0x73706c6974));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
    const auto nv = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(idx.size())));
    val.insert(val.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(nv));
    train.insert(train.end(), idx.begin() + static_cast<std::ptrdiff_t>(nv), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

Dataset subset(const Dataset& d, const std::vector<std::size_t>& idx) {
  Dataset out;
  for (auto i : idx) out.samples.push_back(d.samples.at(i));
  return out;
}

void TrainConfig::validate() const {
  auto bad = [](const std::string& m) { fail(Errc::ConfigInvalid, m); };
  if (epochs == 0) bad("epochs must be positive");
  if (batch_size < 2) bad("batch_size must be >= 2 (batch norm)");
  if (freeze_epochs >= epochs) bad("freeze_epochs must be smaller than epochs");
  if (!(lr_phase1 >= 0.0) || !(lr_phase2 >= 0.0)) bad("learning rates must be >= 0");
  if (!(gamma >= 0.0)) bad("focal gamma must be >= 0");
  if (early_stop.patience < 1 || plateau.patience < 1) bad("patience must be >= 1");
  if (!(plateau.factor > 0.0 && plateau.factor < 1.0)) bad("plateau factor must be in (0, 1)");
  augmentation.validate();
  parse_monitor(early_stop.monitor);
  parse_monitor(plateau.monitor);
  parse_monitor(checkpoint.monitor);
}

double EpochRecord::value(Monitor m) const {
  switch (m) {
    case Monitor::TrainLoss: return train_loss;
    case Monitor::ValLoss: return val_loss;
    case Monitor::ValAuc: return val_auc;
    case Monitor::ValF1: return val_f1;
    case Monitor::ValAccuracy: return val_accuracy;
  }
  return 0.0;
}

std::string History::to_csv(bool wall_time) const {
  std::string s = "epoch,phase,lr,train_loss,val_loss,val_auc,val_f1,val_accuracy";
  s += wall_time ? ",wall_time\n" : "\n";
  for (const auto& e : epochs) {
    s += std::to_string(e.epoch) + "," + std::to_string(e.phase) + "," + num(e.lr) + "," + num(e.train_loss) + "," +
         num(e.val_loss) + "," + num(e.val_auc) + "," + num(e.val_f1) + "," + num(e.val_accuracy);
    if (wall_time) s += "," + num(e.wall_time);
    s += "\n";
  }
  return s;
}

std::string History::to_json(bool wall_time) const {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["phase"] = e.phase;
    j["lr"] = e.lr;
    j["train_loss"] = e.train_loss;
    j["val_loss"] = e.val_loss;
    j["val_metrics"] = {{"auc", e.val_auc}, {"f1", e.val_f1}, {"accuracy", e.val_accuracy}};
    if (wall_time) j["wall_time"] = e.wall_time;
    arr.push_back(j);
  }
  return nlohmann::ordered_json{{"epochs", arr}}.dump(2) + "\n";
}

Grid3 to_grid(const Tensor& image) {
  Grid3 g;
  const auto& s = image.shape();
  if (s.size() == 4) {
    g.nz = s[1], g.ny = s[2], g.nx = s[3];
  } else if (s.size() == 3) {
    g.ny = s[1], g.nx = s[2];
  } else {
    fail(Errc::ShapeMismatch, "sample image must be [C, *spatial]");
  }
  if (s[0] != 1) fail(Errc::ShapeMismatch, "augmentation supports single-channel images");
  g.values.assign(image.data().begin(), image.data().end());
  return g;
}

Tensor from_grid(const Grid3& g, const tensor::Shape& shape) { return Tensor(shape, g.values); }

std::vector<double> predict_dead(const net::Model& m, const Dataset& d, std::size_t batch_size) {
  std::vector<double> out;
  std::vector<std::size_t> order(d.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(i),
                                 order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
    std::vector<Tensor> imgs;
    for (auto k : idx) imgs.push_back(d.samples[k].image);
    const Tensor probs = net::predict(m, net::stack(imgs), metadata_batch(m, d, idx));
    for (std::size_t r = 0; r < idx.size(); ++r) out.push_back(probs.data()[r * probs.dim(1) + 1]);
  }
  return out;
}

ValidationResult validate(const net::Model& m, const Dataset& d, double gamma, std::size_t batch_size) {
  ValidationResult r;
  r.score_dead = predict_dead(m, d, batch_size);
  const auto labels = d.labels();
  std::vector<int> pred;
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p_dead = r.score_dead[i];
    const double p_true = labels[i] == 1 ? p_dead : 1.0 - p_dead;
    loss += focal_term(p_true, gamma);
    pred.push_back(p_dead >= 0.5 ? 1 : 0);
  }
  r.loss = loss / static_cast<double>(labels.size());
  r.auc = eval::roc_auc(r.score_dead, labels);
  const auto cm = eval::confusion(pred, labels, 2);
  std::vector<eval::ClassMetrics> per;
  for (const auto& c : cm.classes) per.push_back(eval::class_metrics(c));
  const auto macro = eval::macro_average(per, cm.classes, eval::UndefinedPolicy::ZeroFill);
  r.f1 = macro.metrics.f1.value;
  r.accuracy = per[0].accuracy.value;
  return r;
}

FitResult fit(net::Model& model, const Dataset& train, const Dataset& val, const TrainConfig& config,
              const EpochHook& hook) {
  config.validate();
  require_both_classes(train, "training");
  require_both_classes(val, "validation");
  const auto train_labels = train.labels();
  const auto weights = compute_class_weights(train_labels, model.config().num_classes, config.class_weight_mode,
                                             config.class_weights);
  if (model.fused() && !model.metadata_spec()->fitted()) {
    net::MetadataSpec spec = *model.metadata_spec();
    std::vector<net::MetadataRow> rows;
    for (const auto& s : train.samples) rows.push_back(s.metadata);
    spec.fit(rows);
    model.set_metadata_spec(spec);
  }
  if (!config.checkpoint_dir.empty()) std::filesystem::create_directories(config.checkpoint_dir);

  const auto part = net::param_partition(model);
  const auto all = model.parameter_names();
  Adam opt(config.adam);
  opt.attach(model);
  double lr = config.lr_phase1;
  if (config.freeze_epochs > 0) {
    model.set_trainable(part.backbone, false);
  } else {
    lr = config.lr_phase2;
  }

  const Monitor best_monitor = parse_monitor(config.checkpoint.monitor);
  ImprovementTracker best_main(best_monitor, 0.0), best_auc(Monitor::ValAuc, 0.0), best_f1(Monitor::ValF1, 0.0),
      best_loss(Monitor::ValLoss, 0.0);
  std::optional<ReduceLrOnPlateau> plateau;
  std::optional<EarlyStopping> stopper;
  if (config.freeze_epochs == 0) {
    plateau.emplace(config.plateau);
    stopper.emplace(config.early_stop);
  }
  const Monitor plateau_monitor = parse_monitor(config.plateau.monitor);
  const Monitor stop_monitor = parse_monitor(config.early_stop.monitor);

  FitResult result;
  auto snapshot = [&](const std::string& name, const EpochRecord& rec, Monitor m) {
    CheckpointMeta meta{rec.epoch, rec.phase, rec.lr, std::string(to_string(m)), rec.value(m), config.seed};
    auto enc = encode_checkpoint(model, &opt, meta);
    if (!config.checkpoint_dir.empty()) save_checkpoint(config.checkpoint_dir / name, enc);
    result.checkpoints[name] = std::move(enc);
  };

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const int phase = epoch <= config.freeze_epochs ? 1 : 2;
    if (phase == 2 && epoch == config.freeze_epochs + 1 && config.freeze_epochs > 0) {
      model.set_trainable(all, true);
      opt = Adam(config.adam);
      opt.attach(model);
      lr = config.lr_phase2;
      plateau.emplace(config.plateau);
      stopper.emplace(config.early_stop);
    }
    const auto& trainable = phase == 1 ? part.head : all;

    std::vector<std::size_t> order(train.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle(mix_seed(config.seed, epoch, 0x73687566));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle, i)]);

    double loss_sum = 0.0;
    std::size_t batch_no = 0;
    for (const auto& idx : batches(order, config.batch_size)) {
      std::vector<Tensor> imgs;
      std::vector<int> targets;
      for (auto k : idx) {
        const Sample& s = train.samples[k];
        // Per-sample seed: independent of batch composition and order.
        const auto aug = augment_sample(to_grid(s.image), mix_seed(config.seed, epoch, k + 1), config.augmentation);
        imgs.push_back(from_grid(aug, s.image.shape()));
        targets.push_back(s.label);
      }
      for (const auto& p : model.parameters()) {
        Tensor t = p.value;
        t.zero_grad();
      }
      Rng drop(mix_seed(config.seed, epoch, 0x64726f70 + batch_no++));
      tensor::Tape tape;
      net::ForwardOptions fo;
      fo.mode = tensor::NormMode::Train;
      fo.dropout_rng = &drop;
      const auto out = net::forward(model, tape, net::stack(imgs), metadata_batch(model, train, idx), fo);
      const Tensor loss = focal_loss(tape, out.probs, targets, weights, config.gamma);
      tape.backward(loss);
      opt.step(model, trainable, lr);
      loss_sum += loss.item() * static_cast<double>(idx.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = phase;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(train.samples.size());
    const auto v = validate(model, val, config.gamma, config.batch_size);
    rec.val_loss = v.loss;
    rec.val_auc = v.auc;
    rec.val_f1 = v.f1;
    rec.val_accuracy = v.accuracy;

    // checkpoint -> plateau -> early stop
    if (best_main.observe(rec.value(best_monitor))) snapshot("best", rec, best_monitor);
    if (best_auc.observe(rec.val_auc)) snapshot("best_auc", rec, Monitor::ValAuc);
    if (best_f1.observe(rec.val_f1)) snapshot("best_f1", rec, Monitor::ValF1);
    if (best_loss.observe(rec.val_loss)) snapshot("best_loss", rec, Monitor::ValLoss);
    snapshot("last", rec, best_monitor);

    double next_lr = lr;
    bool stop = false;
    if (phase == 2) {
      next_lr = plateau->update(rec.value(plateau_monitor), lr);
      stop = stopper->update(rec.value(stop_monitor));
    }
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.epochs.push_back(rec);
    if (hook) hook(rec, model);
    lr = next_lr;
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  model.set_trainable(all, true);
  return result;
}

}  // namespace sahnet::train
