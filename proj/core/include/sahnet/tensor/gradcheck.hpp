#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sahnet/tensor/tape.hpp"
#include "sahnet/tensor/tensor.hpp"

namespace sahnet::tensor {

struct GradCheckOptions {
  double eps = 1e-5;
  /// 0 checks every coordinate; otherwise a seeded sample of this many per
  /// tensor.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
  /// When the forward and backward quotients disagree by more than
  /// `kink_tolerance` (relative), the step may straddle a kink: the largest of
  /// eps, eps/10, ... whose estimate matches the next smaller step is used,
  /// falling back to eps.
  std::size_t kink_retries = 2;
  double kink_tolerance = 1e-4;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::string worst;  // "tensor#index"
  std::size_t kink_steps = 0;  // coordinates that needed a smaller step
};

/// Relative error as used by the checker: |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

/// Compares the tape gradient of `f` against central differences for every
/// tensor in `params`. `f` must build its graph on the tape it is given and
/// return a scalar.
GradCheckResult finite_diff_check(const std::function<Tensor(Tape&)>& f,
                                  std::vector<Tensor> params,
                                  const GradCheckOptions& options = {});

}  // namespace sahnet::tensor
