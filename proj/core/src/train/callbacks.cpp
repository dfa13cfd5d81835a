#include "sahnet/train/callbacks.hpp"

#include <algorithm>

#include "sahnet/error.hpp"

namespace sahnet::train {

Monitor parse_monitor(std::string_view name) {
  if (name == "train_loss") return Monitor::TrainLoss;
  if (name == "val_loss") return Monitor::ValLoss;
  if (name == "val_auc") return Monitor::ValAuc;
  if (name == "val_f1") return Monitor::ValF1;
  if (name == "val_accuracy") return Monitor::ValAccuracy;
  fail(Errc::UnknownMonitor, "unknown monitor '" + std::string(name) + "'");
}

std::string_view to_string(Monitor m) noexcept {
  switch (m) {
    case Monitor::TrainLoss: return "train_loss";
    case Monitor::ValLoss: return "val_loss";
    case Monitor::ValAuc: return "val_auc";
    case Monitor::ValF1: return "val_f1";
    case Monitor::ValAccuracy: return "val_accuracy";
  }
  return "?";
}

bool lower_is_better(Monitor m) noexcept { return m == Monitor::TrainLoss || m == Monitor::ValLoss; }

bool ImprovementTracker::observe(double value) {
  bool improved;
  if (!has_best_) {
    improved = true;
  } else if (lower_is_better(monitor_)) {
    improved = value < best_ - min_delta_;
  } else {
    improved = value > best_ + min_delta_;
  }
  if (improved) {
    best_ = value;
    has_best_ = true;
    wait_ = 0;
  } else {
    ++wait_;
  }
  return improved;
}

EarlyStopping::EarlyStopping(const EarlyStopConfig& config)
    : patience_(config.patience), tracker_(parse_monitor(config.monitor), config.min_delta) {
  if (patience_ < 1) fail(Errc::ConfigInvalid, "early-stop patience must be >= 1");
}

bool EarlyStopping::update(double value) {
  tracker_.observe(value);
  return tracker_.wait() >= patience_;
}

ReduceLrOnPlateau::ReduceLrOnPlateau(const PlateauConfig& config)
    : config_(config), tracker_(parse_monitor(config.monitor), config.min_delta) {
  if (config.patience < 1) fail(Errc::ConfigInvalid, "plateau patience must be >= 1");
  if (!(config.factor > 0.0 && config.factor < 1.0)) fail(Errc::ConfigInvalid, "plateau factor must be in (0, 1)");
}

double ReduceLrOnPlateau::update(double value, double lr) {
  tracker_.observe(value);
  if (tracker_.wait() < config_.patience) return lr;
  tracker_.reset_wait();
  return std::max(lr * config_.factor, config_.min_lr);
}

bool early_stop(const std::vector<double>& history, std::string_view monitor, std::size_t patience,
                double min_delta) {
  if (history.empty()) fail(Errc::ConfigInvalid, "early_stop needs at least one epoch");
  EarlyStopping es({std::string(monitor), patience, min_delta});
  for (double v : history)
    if (es.update(v)) return true;
  return false;
}

double plateau_lr(const std::vector<double>& history, double lr, const PlateauConfig& config) {
  if (history.empty()) fail(Errc::ConfigInvalid, "plateau_lr needs at least one epoch");
  ReduceLrOnPlateau p(config);
  for (double v : history) lr = p.update(v, lr);
  return lr;
}

}  // namespace sahnet::train
