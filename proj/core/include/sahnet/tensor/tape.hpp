#pragma once

#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "sahnet/tensor/tensor.hpp"

namespace sahnet::tensor {

/// Ordered record of differentiable ops executed in recording mode.
///
/// Ops append themselves as they run, so the record is topologically sorted
/// by construction; backward() walks it once in reverse.
class Tape {
 public:
  struct Options {
    bool recording = true;
    /// When false, backward() does not write into leaf tensors (model
    /// parameters); only intermediate activations receive gradients.
    bool leaf_grads = true;
  };

  using BackwardFn = std::function<void(const Tape&)>;

  Tape() = default;
  explicit Tape(Options options) : options_(options) {}

  /// A tape that records nothing (inference).
  static Tape inference() { return Tape(Options{false, true}); }

  bool recording() const noexcept { return options_.recording; }

  /// True when an op over `inputs` must be recorded.
  bool should_record(std::initializer_list<const Tensor*> inputs) const;
  bool should_record(const std::vector<Tensor>& inputs) const;

  /// Whether backward code should accumulate into `t`.
  bool wants_grad(const Tensor& t) const noexcept {
    return t.requires_grad() && (options_.leaf_grads || !t.is_leaf());
  }

  /// Marks `output` as computed and appends the op.
  void record(std::string name, Tensor output, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded op up to the one that
  /// produced `loss`, in reverse. Gradients accumulate. Throws
  /// Error(DisconnectedGraph) when `loss` was not produced on this tape and
  /// Error(ShapeMismatch) when it is not a scalar.
  void backward(const Tensor& loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  const std::string& op_name(std::size_t i) const { return nodes_.at(i).name; }
  /// Number of op backward functions run by the last backward() call.
  std::size_t visited() const noexcept { return visited_; }

 private:
  struct Node {
    std::string name;
    Tensor output;
    BackwardFn backward;
  };
  Options options_;
  std::vector<Node> nodes_;
  std::size_t visited_ = 0;
};

/// Accumulates `values` into t.grad() when the tape wants it.
void accumulate_grad(const Tape& tape, Tensor& t, std::span<const double> values);

}  // namespace sahnet::tensor
