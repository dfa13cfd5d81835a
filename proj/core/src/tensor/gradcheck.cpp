#include "sahnet/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sahnet/random.hpp"

namespace sahnet::tensor {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult finite_diff_check(const std::function<Tensor(Tape&)>& f,
                                  std::vector<Tensor> params,
                                  const GradCheckOptions& options) {
  for (Tensor& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = f(tape);
    // A graph that does not touch any parameter has an all-zero gradient.
    if (!loss.is_leaf()) tape.backward(loss);
    for (Tensor& p : params) {
      const auto g = std::as_const(p).grad();
      analytic.emplace_back(g.begin(), g.end());
      if (analytic.back().empty()) analytic.back().assign(p.numel(), 0.0);
    }
  }

  auto eval = [&f] {
    Tape tape = Tape::inference();
    return f(tape).item();
  };

  GradCheckResult result;
  Rng rng(options.seed);
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = params[t];
    std::vector<std::size_t> coords(p.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_tensor > 0 && coords.size() > options.max_coords_per_tensor) {
      for (std::size_t i = 0; i < options.max_coords_per_tensor; ++i)
        std::swap(coords[i], coords[i + uniform_index(rng, coords.size() - i)]);
      coords.resize(options.max_coords_per_tensor);
    }
    auto data = p.data();
    for (std::size_t i : coords) {
      const double saved = data[i];
      const double centre = eval();
      auto quotients = [&](double eps) {
        data[i] = saved + eps;
        const double up = eval();
        data[i] = saved - eps;
        const double down = eval();
        data[i] = saved;
        return std::pair{(up - down) / (2.0 * eps), relative_error((up - centre) / eps, (centre - down) / eps)};
      };
      auto [numeric, asym] = quotients(options.eps);
      if (asym > options.kink_tolerance && options.kink_retries > 0) {
        // Use the largest step whose estimate the next smaller step confirms;
        // a step straddling a kink disagrees with one that clears it.
        ++result.kink_steps;
        double eps = options.eps, current = numeric;
        for (std::size_t k = 0; k < options.kink_retries; ++k) {
          eps /= 10.0;
          const double next = quotients(eps).first;
          if (relative_error(current, next) <= options.kink_tolerance) {
            numeric = current;
            break;
          }
          current = next;
        }
      }
      const double err = relative_error(analytic[t][i], numeric);
      ++result.coords_checked;
      if (err > result.max_rel_error || result.worst.empty()) {
        result.max_rel_error = std::max(result.max_rel_error, err);
        if (err >= result.max_rel_error) result.worst = std::to_string(t) + "#" + std::to_string(i);
      }
    }
  }
  return result;
}

}  // namespace sahnet::tensor
