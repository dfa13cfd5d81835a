#pragma once

#include <cstddef>
#include <vector>

namespace sahnet::eval {

/// One-vs-rest counts for a single class.
struct Counts {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::size_t total() const noexcept { return tp + tn + fp + fn; }
  friend bool operator==(const Counts&, const Counts&) = default;
};

struct ConfusionMatrix {
  std::vector<Counts> classes;
};

/// Throws LengthMismatch (unequal or empty), UnknownClass.
ConfusionMatrix confusion(const std::vector<int>& pred, const std::vector<int>& truth,
                          std::size_t num_classes = 2);

/// A ratio that may be 0/0.
struct Metric {
  double value = 0.0;
  bool defined = false;
};

struct ClassMetrics {
  Metric sensitivity, specificity, precision, fpr, fnr, fdr, accuracy, f1;
};

/// F1 is 2tp/(2tp+fp+fn), which equals the harmonic mean of precision and
/// sensitivity whenever both are defined and stays defined (0) when tp = 0
/// but fn > 0.
ClassMetrics class_metrics(const Counts& c);

enum class UndefinedPolicy {
  Propagate,  // any undefined input makes the average undefined
  ZeroFill,   // undefined inputs count as 0
};

struct MacroRecord {
  ClassMetrics metrics;
  double tp = 0, tn = 0, fp = 0, fn = 0;
};

MacroRecord macro_average(const std::vector<ClassMetrics>& per_class, const std::vector<Counts>& counts,
                          UndefinedPolicy policy = UndefinedPolicy::Propagate);

/// Half away from zero to 2 decimals.
double round2(double v);

}  // namespace sahnet::eval
