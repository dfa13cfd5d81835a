#include "sahnet/net/convert.hpp"

#include <algorithm>

#include "sahnet/error.hpp"

namespace sahnet::net {

tensor::Tensor volume_to_sample(const volio::Volume& v, std::size_t spatial_dims) {
  const auto s = v.shape();
  tensor::Shape shape;
  if (spatial_dims == 3) {
    shape = {1, s.nz, s.ny, s.nx};
  } else if (spatial_dims == 2) {
    if (s.nz != 1) fail(Errc::ShapeMismatch, "2D mode needs a single-slice volume");
    shape = {1, s.ny, s.nx};
  } else {
    fail(Errc::RankUnsupported, "spatial_dims must be 2 or 3");
  }
  const auto d = v.data();
  return tensor::Tensor(shape, std::vector<double>(d.begin(), d.end()));
}

tensor::Tensor stack(const std::vector<tensor::Tensor>& samples) {
  if (samples.empty()) fail(Errc::ShapeMismatch, "cannot stack an empty batch");
  const auto& s0 = samples.front().shape();
  tensor::Shape shape{samples.size()};
  shape.insert(shape.end(), s0.begin(), s0.end());
  tensor::Tensor out(shape);
  const std::size_t n = samples.front().numel();
  auto d = out.data();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].shape() != s0)
      fail(Errc::ShapeMismatch, "stack: " + tensor::to_string(samples[i].shape()) + " vs " + tensor::to_string(s0));
    std::copy_n(samples[i].data().begin(), n, d.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  return out;
}

tensor::Tensor unstack(const tensor::Tensor& batch, std::size_t n) {
  if (batch.rank() < 2 || n >= batch.dim(0)) fail(Errc::ShapeMismatch, "unstack index out of range");
  tensor::Shape shape(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t len = tensor::numel(shape);
  const auto d = batch.data();
  return tensor::Tensor(shape, std::vector<double>(d.begin() + static_cast<std::ptrdiff_t>(n * len),
                                                   d.begin() + static_cast<std::ptrdiff_t>((n + 1) * len)));
}

volio::Volume grid_to_volume(const std::vector<double>& grid, const volio::Volume& reference,
                             volio::IntensityUnit unit) {
  if (grid.size() != reference.shape().size())
    fail(Errc::ShapeMismatch, "grid has " + std::to_string(grid.size()) + " values, reference " +
                                  std::to_string(reference.shape().size()));
  std::vector<float> data(grid.begin(), grid.end());
  return volio::Volume(reference.shape(), reference.affine(), std::move(data), unit);
}

}  // namespace sahnet::net
