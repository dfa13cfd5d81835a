#include "sahnet/train/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sahnet/error.hpp"

namespace sahnet::train {

using tensor::Tensor;

std::vector<double> compute_class_weights(const std::vector<int>& labels, std::size_t num_classes,
                                          ClassWeightMode mode, const std::vector<double>& explicit_weights) {
  if (num_classes == 0) fail(Errc::ConfigInvalid, "num_classes must be positive");
  std::vector<std::size_t> counts(num_classes, 0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes)
      fail(Errc::UnknownClass, "label " + std::to_string(l) + " out of range");
    ++counts[static_cast<std::size_t>(l)];
  }
  switch (mode) {
    case ClassWeightMode::None: return std::vector<double>(num_classes, 1.0);
    case ClassWeightMode::Explicit:
      if (explicit_weights.size() != num_classes)
        fail(Errc::ConfigInvalid, "explicit class weights need one value per class");
      for (double w : explicit_weights)
        if (!(w > 0.0) || !std::isfinite(w)) fail(Errc::ConfigInvalid, "class weights must be positive");
      return explicit_weights;
    case ClassWeightMode::Balanced: break;
  }
  std::vector<double> w(num_classes);
  const double n = static_cast<double>(labels.size()), c = static_cast<double>(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (counts[k] == 0) fail(Errc::MissingClass, "class " + std::to_string(k) + " has no samples");
    w[k] = n / (c * static_cast<double>(counts[k]));
  }
  return w;
}

double focal_term(double p, double gamma) {
  const double q = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return -std::pow(1.0 - q, gamma) * std::log(q);
}

Tensor focal_loss(tensor::Tape& tape, Tensor probs, const std::vector<int>& targets,
                  const std::vector<double>& weights, double gamma) {
  if (probs.rank() != 2 || probs.dim(0) != targets.size() || weights.size() != probs.dim(1))
    fail(Errc::ShapeMismatch, "focal_loss: probs " + tensor::to_string(probs.shape()) + " vs " +
                                  std::to_string(targets.size()) + " targets and " + std::to_string(weights.size()) +
                                  " weights");
  if (gamma < 0.0) fail(Errc::ConfigInvalid, "focal gamma must be >= 0");
  const std::size_t N = probs.dim(0), K = probs.dim(1);
  for (int t : targets)
    if (t < 0 || static_cast<std::size_t>(t) >= K) fail(Errc::UnknownClass, "target out of range");
  const auto pd = probs.data();
  double acc = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const auto y = static_cast<std::size_t>(targets[n]);
    acc += weights[y] * focal_term(pd[n * K + y], gamma);
  }
  Tensor loss = Tensor::scalar(acc / static_cast<double>(N));
  if (!tape.should_record({&probs})) return loss;
  tape.record("focal_loss", loss, [probs, loss, targets, weights, gamma, N, K](const tensor::Tape& t) mutable {
    if (!t.wants_grad(probs)) return;
    const double g = loss.grad()[0] / static_cast<double>(N);
    const auto pd = probs.data();
    auto gp = probs.grad();
    for (std::size_t n = 0; n < N; ++n) {
      const auto y = static_cast<std::size_t>(targets[n]);
      const double p = pd[n * K + y];
      if (p < kProbClamp || p > 1.0 - kProbClamp) continue;  // clamped: flat
      // d/dp of -(1-p)^g log p
      const double d = gamma * std::pow(1.0 - p, gamma - 1.0) * std::log(p) - std::pow(1.0 - p, gamma) / p;
      gp[n * K + y] += g * weights[y] * d;
    }
  });
  return loss;
}

}  // namespace sahnet::train
