#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sahnet/net/densenet.hpp"
#include "sahnet/train/augment.hpp"
#include "sahnet/train/callbacks.hpp"
#include "sahnet/train/checkpoint.hpp"
#include "sahnet/train/loss.hpp"
#include "sahnet/train/optimizer.hpp"

namespace sahnet::train {

/// Class ids: 0 alive, 1 dead.
struct Sample {
  std::string id;
  tensor::Tensor image;  // [C, *spatial]
  int label = 0;
  net::MetadataRow metadata{};
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<int> labels() const;
};

/// Stratified split: within each class a seeded shuffle, then the first
/// round(fraction * n_c) go to validation. Returns {train, val} indices.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(const std::vector<int>& labels,
                                                                               double val_fraction,
                                                                               std::uint64_t seed);
Dataset subset(const Dataset& d, const std::vector<std::size_t>& idx);

struct CheckpointConfig {
  std::string monitor = "val_auc";
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  AdamConfig adam;
  double lr_phase1 = 1e-3;
  double lr_phase2 = 1e-4;
  std::size_t freeze_epochs = 5;
  double gamma = 2.0;
  ClassWeightMode class_weight_mode = ClassWeightMode::Balanced;
  std::vector<double> class_weights;  // explicit mode only
  AugConfig augmentation;
  EarlyStopConfig early_stop;
  PlateauConfig plateau;
  CheckpointConfig checkpoint;
  std::uint64_t seed = 0;
  /// When set, best/last/snapshot checkpoints are written here each epoch.
  std::filesystem::path checkpoint_dir;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  int phase = 1;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_auc = 0.0;
  double val_f1 = 0.0;
  double val_accuracy = 0.0;
  double wall_time = 0.0;  // seconds, excluded from exports unless asked

  double value(Monitor m) const;
};

struct History {
  std::vector<EpochRecord> epochs;
  std::string to_csv(bool wall_time = false) const;
  std::string to_json(bool wall_time = false) const;
};

struct ValidationResult {
  double loss = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::vector<double> score_dead;
};

/// Eval-mode probabilities of the dead class, in dataset order.
std::vector<double> predict_dead(const net::Model& m, const Dataset& d, std::size_t batch_size = 8);
/// Unweighted focal loss, AUC, macro F1 (undefined cells as 0), accuracy.
ValidationResult validate(const net::Model& m, const Dataset& d, double gamma, std::size_t batch_size = 8);

struct FitResult {
  History history;
  /// "best" (by the checkpoint monitor), "last", "best_auc", "best_f1",
  /// "best_loss".
  std::map<std::string, EncodedCheckpoint> checkpoints;
  bool stopped_early = false;
};

/// Observer called after every epoch with the model in its end-of-epoch
/// state (tests use it to inspect the freeze contract).
using EpochHook = std::function<void(const EpochRecord&, const net::Model&)>;

/// Phase 1 trains only the head for freeze_epochs at lr_phase1 (backbone
/// gradients are never computed); phase 2 trains everything at lr_phase2
/// with a fresh optimizer. Callbacks run checkpoint -> plateau -> early stop;
/// plateau and early stop only act in phase 2 and start from a clean state.
/// Throws EmptyClass when a split lacks a class.
FitResult fit(net::Model& model, const Dataset& train, const Dataset& val, const TrainConfig& config,
              const EpochHook& hook = {});

/// Converts a sample image to the Grid3 used by augmentation.
Grid3 to_grid(const tensor::Tensor& image);
tensor::Tensor from_grid(const Grid3& g, const tensor::Shape& shape);

}  // namespace sahnet::train
