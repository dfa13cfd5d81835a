#include "sahnet/train/optimizer.hpp"

#include <cmath>

#include "sahnet/error.hpp"

namespace sahnet::train {

void Adam::attach(const net::Model& model) {
  m_.clear();
  v_.clear();
  t_ = 0;
  for (const auto& p : model.parameters()) {
    m_.emplace(p.name, tensor::Tensor(p.value.shape()));
    v_.emplace(p.name, tensor::Tensor(p.value.shape()));
  }
}

void Adam::step(const net::Model& model, const std::vector<std::string>& names, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (const auto& name : names) {
    tensor::Tensor p = model.parameter(name);
    auto mit = m_.find(name);
    if (mit == m_.end()) fail(Errc::UnknownTensorName, "optimizer has no state for " + name);
    if (!p.has_grad()) continue;
    auto m = mit->second.data();
    auto v = v_.at(name).data();
    const auto g = std::as_const(p).grad();
    auto x = p.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double update = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
      x[i] = static_cast<double>(static_cast<float>(x[i] - update));
    }
  }
}

}  // namespace sahnet::train
