#include "sahnet/eval/metrics.hpp"

#include <cmath>
#include <string>

#include "sahnet/error.hpp"

namespace sahnet::eval {
namespace {

Metric ratio(std::size_t num, std::size_t den) {
  if (den == 0) return {};
  return {static_cast<double>(num) / static_cast<double>(den), true};
}

Metric complement(Metric m) {
  if (!m.defined) return {};
  return {1.0 - m.value, true};
}

Metric average(const std::vector<ClassMetrics>& xs, Metric ClassMetrics::*field, UndefinedPolicy policy) {
  double acc = 0.0;
  for (const auto& x : xs) {
    const Metric& m = x.*field;
    if (!m.defined && policy == UndefinedPolicy::Propagate) return {};
    acc += m.defined ? m.value : 0.0;
  }
  return {acc / static_cast<double>(xs.size()), true};
}

}  // namespace

ConfusionMatrix confusion(const std::vector<int>& pred, const std::vector<int>& truth, std::size_t num_classes) {
  if (pred.size() != truth.size() || pred.empty())
    fail(Errc::LengthMismatch, "confusion needs equal, non-empty inputs (" + std::to_string(pred.size()) + " vs " +
                                   std::to_string(truth.size()) + ")");
  const auto K = static_cast<int>(num_classes);
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] < 0 || pred[i] >= K || truth[i] < 0 || truth[i] >= K)
      fail(Errc::UnknownClass, "class id out of range at index " + std::to_string(i));
  ConfusionMatrix cm;
  cm.classes.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const int k = static_cast<int>(c);
    Counts& n = cm.classes[c];
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool p = pred[i] == k, t = truth[i] == k;
      if (p && t) ++n.tp;
      else if (!p && !t) ++n.tn;
      else if (p) ++n.fp;
      else ++n.fn;
    }
  }
  return cm;
}

ClassMetrics class_metrics(const Counts& c) {
  ClassMetrics m;
  m.sensitivity = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  m.fpr = complement(m.specificity);
  m.fnr = complement(m.sensitivity);
  m.fdr = complement(m.precision);
  return m;
}

MacroRecord macro_average(const std::vector<ClassMetrics>& per_class, const std::vector<Counts>& counts,
                          UndefinedPolicy policy) {
  if (per_class.size() < 2 || per_class.size() != counts.size())
    fail(Errc::LengthMismatch, "macro_average needs matching metrics and counts for at least 2 classes");
  MacroRecord r;
  r.metrics.sensitivity = average(per_class, &ClassMetrics::sensitivity, policy);
  r.metrics.specificity = average(per_class, &ClassMetrics::specificity, policy);
  r.metrics.precision = average(per_class, &ClassMetrics::precision, policy);
  r.metrics.fpr = average(per_class, &ClassMetrics::fpr, policy);
  r.metrics.fnr = average(per_class, &ClassMetrics::fnr, policy);
  r.metrics.fdr = average(per_class, &ClassMetrics::fdr, policy);
  r.metrics.accuracy = average(per_class, &ClassMetrics::accuracy, policy);
  r.metrics.f1 = average(per_class, &ClassMetrics::f1, policy);
  const double n = static_cast<double>(counts.size());
  for (const auto& c : counts) {
    r.tp += static_cast<double>(c.tp) / n;
    r.tn += static_cast<double>(c.tn) / n;
    r.fp += static_cast<double>(c.fp) / n;
    r.fn += static_cast<double>(c.fn) / n;
  }
  return r;
}

double round2(double v) {
  // Nudge by a relative epsilon so values such as 0.725 that are stored just
  // below the tie still round away from zero.
  const double scaled = v * 100.0;
  const double nudged = scaled + std::copysign(std::abs(scaled) * 1e-12, scaled);
  return std::round(nudged) / 100.0;
}

}  // namespace sahnet::eval
