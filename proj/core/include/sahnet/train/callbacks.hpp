#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace sahnet::train {

enum class Monitor { TrainLoss, ValLoss, ValAuc, ValF1, ValAccuracy };

/// "train_loss", "val_loss", "val_auc", "val_f1", "val_accuracy".
/// Throws Error(UnknownMonitor).
Monitor parse_monitor(std::string_view name);
std::string_view to_string(Monitor m) noexcept;
bool lower_is_better(Monitor m) noexcept;

/// Tracks the best value seen and how many epochs have passed without an
/// improvement larger than min_delta.
class ImprovementTracker {
 public:
  ImprovementTracker(Monitor monitor, double min_delta) : monitor_(monitor), min_delta_(min_delta) {}

  /// Returns true when `value` improves on the best so far.
  bool observe(double value);
  std::size_t wait() const noexcept { return wait_; }
  void reset_wait() noexcept { wait_ = 0; }
  bool has_best() const noexcept { return has_best_; }
  double best() const noexcept { return best_; }
  Monitor monitor() const noexcept { return monitor_; }

 private:
  Monitor monitor_;
  double min_delta_;
  bool has_best_ = false;
  double best_ = 0.0;
  std::size_t wait_ = 0;
};

struct EarlyStopConfig {
  std::string monitor = "val_loss";
  std::size_t patience = 10;
  double min_delta = 0.0;
};

class EarlyStopping {
 public:
  explicit EarlyStopping(const EarlyStopConfig& config);
  /// Feeds one epoch; returns true when training should stop.
  bool update(double value);

 private:
  std::size_t patience_;
  ImprovementTracker tracker_;
};

struct PlateauConfig {
  std::string monitor = "val_loss";
  double factor = 0.1;
  std::size_t patience = 5;
  double min_lr = 1e-6;
  double min_delta = 0.0;
};

class ReduceLrOnPlateau {
 public:
  explicit ReduceLrOnPlateau(const PlateauConfig& config);
  /// Feeds one epoch and returns the learning rate for the next one.
  double update(double value, double lr);

 private:
  PlateauConfig config_;
  ImprovementTracker tracker_;
};

/// Replays a whole metric history; true when early stopping fires at the
/// last epoch or earlier.
bool early_stop(const std::vector<double>& history, std::string_view monitor, std::size_t patience,
                double min_delta);
/// Replays a history and returns the learning rate after the last epoch.
double plateau_lr(const std::vector<double>& history, double lr, const PlateauConfig& config);

}  // namespace sahnet::train
