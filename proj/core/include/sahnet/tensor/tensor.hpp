#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sahnet::tensor {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape) noexcept;
std::string to_string(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// Tensor is a handle: copies share storage, which is what lets the tape
/// write gradients back into parameters. Use clone() for an independent
/// copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t i) const { return shape().at(i); }
  std::size_t numel() const;

  std::span<double> data();
  std::span<const double> data() const;
  double item() const;

  bool requires_grad() const noexcept { return impl_ && impl_->requires_grad; }
  void set_requires_grad(bool value);
  /// False for tensors produced by a recorded op.
  bool is_leaf() const noexcept { return !impl_ || impl_->leaf; }

  bool has_grad() const noexcept { return impl_ && !impl_->grad.empty(); }
  /// Gradient buffer, allocated (zeroed) on first access.
  std::span<double> grad();
  /// Empty span when no gradient has been accumulated.
  std::span<const double> grad() const;
  void zero_grad();

  /// Deep copy of the data; the copy is a leaf without gradient.
  Tensor clone() const;
  bool same(const Tensor& other) const noexcept { return impl_ == other.impl_; }

  /// Marks the tensor as produced by a recorded op.
  void mark_computed();

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    bool leaf = true;
  };
  std::shared_ptr<Impl> impl_;
};

/// Rounds every element to the nearest float32 value.
void round_to_float(Tensor& t);

}  // namespace sahnet::tensor
