#include "sahnet/tensor/tensor.hpp"

#include <algorithm>
#include <numeric>

#include "sahnet/error.hpp"

namespace sahnet::tensor {

std::size_t numel(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, bool requires_grad) : impl_(std::make_shared<Impl>()) {
  for (auto d : shape)
    if (d == 0) fail(Errc::ShapeMismatch, "tensor dimensions must be positive: " + to_string(shape));
  impl_->data.assign(tensor::numel(shape), 0.0);
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : Tensor(std::move(shape), requires_grad) {
  if (data.size() != impl_->data.size())
    fail(Errc::ShapeMismatch, "data length " + std::to_string(data.size()) +
                                  " does not match shape " + to_string(impl_->shape));
  impl_->data = std::move(data);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!impl_) fail(Errc::ShapeMismatch, "undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::numel() const { return impl_ ? impl_->data.size() : 0; }

std::span<double> Tensor::data() {
  if (!impl_) fail(Errc::ShapeMismatch, "undefined tensor");
  return impl_->data;
}

std::span<const double> Tensor::data() const {
  if (!impl_) fail(Errc::ShapeMismatch, "undefined tensor");
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) fail(Errc::ShapeMismatch, "item() needs a single-element tensor");
  return impl_->data[0];
}

void Tensor::set_requires_grad(bool value) {
  if (!impl_) fail(Errc::ShapeMismatch, "undefined tensor");
  impl_->requires_grad = value;
}

std::span<double> Tensor::grad() {
  if (!impl_) fail(Errc::ShapeMismatch, "undefined tensor");
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

std::span<const double> Tensor::grad() const {
  if (!impl_) return {};
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  if (!impl_) return {};
  return Tensor(impl_->shape, impl_->data, impl_->requires_grad);
}

void Tensor::mark_computed() {
  impl_->leaf = false;
  impl_->requires_grad = true;
}

void round_to_float(Tensor& t) {
  for (double& v : t.data()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace sahnet::tensor
