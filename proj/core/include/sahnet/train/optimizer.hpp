#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sahnet/net/densenet.hpp"

namespace sahnet::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are kept per parameter name in 64-bit;
/// updated parameters are rounded to float32 so checkpoints are lossless.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Creates zero moments for every parameter of the model.
  void attach(const net::Model& model);

  /// Applies one update to the named parameters using their current grads.
  /// Parameters without an accumulated gradient are left unchanged.
  void step(const net::Model& model, const std::vector<std::string>& names, double lr);

  std::uint64_t steps() const noexcept { return t_; }
  void set_steps(std::uint64_t t) noexcept { t_ = t; }
  const AdamConfig& config() const noexcept { return config_; }

  std::map<std::string, tensor::Tensor>& first_moments() noexcept { return m_; }
  std::map<std::string, tensor::Tensor>& second_moments() noexcept { return v_; }
  const std::map<std::string, tensor::Tensor>& first_moments() const noexcept { return m_; }
  const std::map<std::string, tensor::Tensor>& second_moments() const noexcept { return v_; }

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::map<std::string, tensor::Tensor> m_;
  std::map<std::string, tensor::Tensor> v_;
};

}  // namespace sahnet::train
