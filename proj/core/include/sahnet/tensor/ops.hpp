#pragma once

#include <cstddef>
#include <vector>

#include "sahnet/random.hpp"
#include "sahnet/tensor/tape.hpp"
#include "sahnet/tensor/tensor.hpp"

namespace sahnet::tensor {

// Every op takes the tape first. Ops record themselves only when the tape is
// recording and at least one input requires a gradient.
//
// Spatial layouts are row-major [N, C, *spatial]. Ops accept 2 or 3 spatial
// dims; 2D is run as 3D with a depth of one.

enum class ConvAlgo {
  Reference,  // plain nested loops, the correctness anchor
  Direct,     // loops reordered for contiguous inner access
  Im2col,     // column buffer + matrix multiply
};

/// Cross-correlation. `b` may be undefined (no bias). All algorithms sum each
/// output element in (ci, kz, ky, kx) order and add the bias last, so they
/// agree bitwise.
Tensor conv_nd(Tape& tape, Tensor x, Tensor w, Tensor b,
               const std::vector<std::size_t>& stride,
               const std::vector<std::size_t>& padding,
               ConvAlgo algo = ConvAlgo::Im2col);

enum class NormMode { Train, Eval };

struct BatchNormState {
  Tensor running_mean;  // [C]
  Tensor running_var;   // [C]
  double momentum = 0.9;
  double eps = 1e-5;
};

/// Train mode normalizes by batch statistics and updates the running
/// statistics (running = momentum*running + (1-momentum)*batch, unbiased
/// variance). Eval mode normalizes by the running statistics.
Tensor batch_norm(Tape& tape, Tensor x, Tensor gamma, Tensor beta,
                  BatchNormState& state, NormMode mode);

Tensor relu(Tape& tape, Tensor x);

/// Padded positions never win the max.
Tensor max_pool(Tape& tape, Tensor x, std::size_t window, std::size_t stride,
                std::size_t padding = 0);
Tensor avg_pool(Tape& tape, Tensor x, std::size_t window, std::size_t stride);

Tensor concat_channels(Tape& tape, std::vector<Tensor> xs);
Tensor slice_channels(Tape& tape, Tensor x, std::size_t begin, std::size_t count);

/// [N, C, *] -> [N, C]
Tensor global_avg_pool(Tape& tape, Tensor x);
/// Concatenates [N, F1] and [N, F2] along the feature axis.
Tensor concat_features(Tape& tape, Tensor a, Tensor b);

/// x[N,F] . W[F,K] + b[K]
Tensor linear(Tape& tape, Tensor x, Tensor w, Tensor b);

/// Row-wise softmax with max subtraction.
Tensor softmax(Tape& tape, Tensor z);

Tensor mul(Tape& tape, Tensor a, Tensor b);
Tensor add(Tape& tape, Tensor a, Tensor b);
Tensor scale(Tape& tape, Tensor x, double factor);
Tensor square(Tape& tape, Tensor x);
/// Sum of all elements -> [1].
Tensor sum(Tape& tape, Tensor x);
/// Sum of elementwise x*weights, weights constant -> [1].
Tensor weighted_sum(Tape& tape, Tensor x, Tensor weights);
/// x[n, k] of a rank-2 tensor -> [1].
Tensor pick(Tape& tape, Tensor x, std::size_t n, std::size_t k);

/// Inverted dropout. Identity when rate == 0 or rng is null (eval).
Tensor dropout(Tape& tape, Tensor x, double rate, Rng* rng);

/// Spatial extent of a [N, C, *] tensor as (d, h, w), d == 1 for 2D.
struct Spatial {
  std::size_t d = 1, h = 1, w = 1;
  std::size_t count() const { return d * h * w; }
};
Spatial spatial_of(const Tensor& x);

}  // namespace sahnet::tensor
