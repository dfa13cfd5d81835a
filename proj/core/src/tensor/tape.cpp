#include "sahnet/tensor/tape.hpp"

#include "sahnet/error.hpp"

namespace sahnet::tensor {

bool Tape::should_record(std::initializer_list<const Tensor*> inputs) const {
  if (!options_.recording) return false;
  for (const Tensor* t : inputs)
    if (t && t->defined() && t->requires_grad()) return true;
  return false;
}

bool Tape::should_record(const std::vector<Tensor>& inputs) const {
  if (!options_.recording) return false;
  for (const Tensor& t : inputs)
    if (t.defined() && t.requires_grad()) return true;
  return false;
}

void Tape::record(std::string name, Tensor output, BackwardFn backward) {
  output.mark_computed();
  nodes_.push_back({std::move(name), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    fail(Errc::ShapeMismatch, "backward() needs a scalar loss");
  std::size_t end = nodes_.size();
  while (end > 0 && !nodes_[end - 1].output.same(loss)) --end;
  if (end == 0) fail(Errc::DisconnectedGraph, "loss was not produced by a recorded op on this tape");

  Tensor seed = loss;
  seed.grad()[0] += 1.0;
  visited_ = 0;
  for (std::size_t i = end; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.output.has_grad()) continue;  // not on a path from the loss
    node.backward(*this);
    ++visited_;
  }
}

void accumulate_grad(const Tape& tape, Tensor& t, std::span<const double> values) {
  if (!tape.wants_grad(t)) return;
  auto g = t.grad();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += values[i];
}

}  // namespace sahnet::tensor
