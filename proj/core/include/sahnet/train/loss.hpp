#pragma once

#include <cstddef>
#include <vector>

#include "sahnet/tensor/tape.hpp"

namespace sahnet::train {

enum class ClassWeightMode { Balanced, None, Explicit };

/// Balanced: w_c = N / (C * N_c). Throws MissingClass when a class has no
/// samples (balanced mode) or ConfigInvalid for a bad explicit vector.
std::vector<double> compute_class_weights(const std::vector<int>& labels, std::size_t num_classes,
                                          ClassWeightMode mode, const std::vector<double>& explicit_weights = {});

inline constexpr double kProbClamp = 1e-7;

/// Mean over the batch of -w_y (1 - p_y)^gamma log(p_y), with p_y clamped to
/// [1e-7, 1 - 1e-7]. probs is [N, K]; targets are class ids.
tensor::Tensor focal_loss(tensor::Tape& tape, tensor::Tensor probs, const std::vector<int>& targets,
                          const std::vector<double>& weights, double gamma);

/// Scalar focal term for a single true-class probability (no weight).
double focal_term(double p, double gamma);

}  // namespace sahnet::train
