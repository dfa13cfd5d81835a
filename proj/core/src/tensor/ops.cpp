#include <algorithm>
#include <cmath>
#include <limits>

#include "sahnet/error.hpp"
#include "sahnet/tensor/ops.hpp"

namespace sahnet::tensor {
namespace {

void require_spatial(const Tensor& x, const char* op) {
  if (x.rank() != 4 && x.rank() != 5)
    fail(Errc::RankUnsupported, std::string(op) + " needs [N,C,*spatial] with 2 or 3 spatial dims, got " +
                                    to_string(x.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    fail(Errc::ShapeMismatch, std::string(op) + ": " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

// Per-channel plane size for [N, C, ...].
std::size_t plane(const Tensor& x) {
  std::size_t s = 1;
  for (std::size_t i = 2; i < x.rank(); ++i) s *= x.dim(i);
  return s;
}

Shape with_spatial(const Tensor& x, std::size_t channels, Spatial s) {
  if (x.rank() == 4) return {x.dim(0), channels, s.h, s.w};
  return {x.dim(0), channels, s.d, s.h, s.w};
}

std::size_t pooled(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
  if (s == 0 || k == 0) fail(Errc::ShapeMismatch, "pool window and stride must be positive");
  if (in + 2 * p < k) fail(Errc::ShapeMismatch, "pool window does not fit the input");
  return (in + 2 * p - k) / s + 1;
}

}  // namespace

Spatial spatial_of(const Tensor& x) {
  require_spatial(x, "spatial_of");
  if (x.rank() == 4) return {1, x.dim(2), x.dim(3)};
  return {x.dim(2), x.dim(3), x.dim(4)};
}

Tensor batch_norm(Tape& tape, Tensor x, Tensor gamma, Tensor beta,
                  BatchNormState& state, NormMode mode) {
  if (x.rank() < 2) fail(Errc::ShapeMismatch, "batch_norm needs [N,C,...]");
  const std::size_t N = x.dim(0), C = x.dim(1), S = plane(x);
  for (const Tensor* p : std::initializer_list<const Tensor*>{&gamma, &beta, &state.running_mean, &state.running_var})
    if (p->rank() != 1 || p->dim(0) != C)
      fail(Errc::ShapeMismatch, "batch_norm parameters must be [" + std::to_string(C) + "]");
  if (mode == NormMode::Train && N < 2)
    fail(Errc::BatchTooSmall, "batch_norm in train mode needs at least 2 samples, got " + std::to_string(N));

  const auto xd = x.data();
  const auto g = gamma.data();
  const auto bt = beta.data();
  Tensor y(x.shape());
  auto yd = y.data();
  std::vector<double> xhat(xd.size());
  std::vector<double> invstd(C);
  const double M = static_cast<double>(N * S);

  for (std::size_t c = 0; c < C; ++c) {
    double mean, var;
    if (mode == NormMode::Train) {
      double acc = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double* r = xd.data() + (n * C + c) * S;
        for (std::size_t s = 0; s < S; ++s) acc += r[s];
      }
      mean = acc / M;
      double sq = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double* r = xd.data() + (n * C + c) * S;
        for (std::size_t s = 0; s < S; ++s) sq += (r[s] - mean) * (r[s] - mean);
      }
      var = sq / M;
      auto rm = state.running_mean.data();
      auto rv = state.running_var.data();
      rm[c] = state.momentum * rm[c] + (1.0 - state.momentum) * mean;
      rv[c] = state.momentum * rv[c] + (1.0 - state.momentum) * var * M / (M - 1.0);
    } else {
      mean = state.running_mean.data()[c];
      var = state.running_var.data()[c];
    }
    invstd[c] = 1.0 / std::sqrt(var + state.eps);
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t o = (n * C + c) * S;
      for (std::size_t s = 0; s < S; ++s) {
        xhat[o + s] = (xd[o + s] - mean) * invstd[c];
        yd[o + s] = g[c] * xhat[o + s] + bt[c];
      }
    }
  }

  if (!tape.should_record({&x, &gamma, &beta})) return y;
  tape.record("batch_norm", y,
              [x, gamma, beta, y, xhat = std::move(xhat), invstd = std::move(invstd), mode, N, C, S,
               M](const Tape& t) mutable {
    const auto gy = y.grad();
    const auto g = gamma.data();
    const bool need_x = t.wants_grad(x);
    std::span<double> gx;
    if (need_x) gx = x.grad();
    for (std::size_t c = 0; c < C; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const std::size_t o = (n * C + c) * S;
        for (std::size_t s = 0; s < S; ++s) {
          sum_dy += gy[o + s];
          sum_dy_xhat += gy[o + s] * xhat[o + s];
        }
      }
      if (t.wants_grad(gamma)) gamma.grad()[c] += sum_dy_xhat;
      if (t.wants_grad(beta)) beta.grad()[c] += sum_dy;
      if (!need_x) continue;
      const double k = g[c] * invstd[c];
      for (std::size_t n = 0; n < N; ++n) {
        const std::size_t o = (n * C + c) * S;
        for (std::size_t s = 0; s < S; ++s) {
          if (mode == NormMode::Train)
            gx[o + s] += k * (gy[o + s] - sum_dy / M - xhat[o + s] * sum_dy_xhat / M);
          else
            gx[o + s] += k * gy[o + s];
        }
      }
    }
  });
  return y;
}

Tensor relu(Tape& tape, Tensor x) {
  Tensor y(x.shape());
  const auto xd = x.data();
  auto yd = y.data();
  for (std::size_t i = 0; i < xd.size(); ++i) yd[i] = xd[i] > 0.0 ? xd[i] : 0.0;
  if (!tape.should_record({&x})) return y;
  tape.record("relu", y, [x, y](const Tape& t) mutable {
    if (!t.wants_grad(x)) return;
    const auto gy = y.grad();
    const auto xd = x.data();
    auto gx = x.grad();
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (xd[i] > 0.0) gx[i] += gy[i];
  });
  return y;
}

Tensor max_pool(Tape& tape, Tensor x, std::size_t window, std::size_t stride,
                std::size_t padding) {
  require_spatial(x, "max_pool");
  const Spatial in = spatial_of(x);
  const bool flat = x.rank() == 4;
  const std::size_t kd = flat ? 1 : window, pd = flat ? 0 : padding, sd = flat ? 1 : stride;
  const Spatial out{pooled(in.d, kd, sd, pd), pooled(in.h, window, stride, padding),
                    pooled(in.w, window, stride, padding)};
  const std::size_t NC = x.dim(0) * x.dim(1);
  Tensor y(with_spatial(x, x.dim(1), out));
  auto yd = y.data();
  const auto xd = x.data();
  std::vector<std::size_t> arg(yd.size());
  for (std::size_t nc = 0; nc < NC; ++nc) {
    const double* src = xd.data() + nc * in.count();
    for (std::size_t oz = 0; oz < out.d; ++oz)
      for (std::size_t oy = 0; oy < out.h; ++oy)
        for (std::size_t ox = 0; ox < out.w; ++ox) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_i = 0;
          bool any = false;
          for (std::size_t kz = 0; kz < kd; ++kz) {
            const long iz = static_cast<long>(oz * sd + kz) - static_cast<long>(pd);
            if (iz < 0 || iz >= static_cast<long>(in.d)) continue;
            for (std::size_t ky = 0; ky < window; ++ky) {
              const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(padding);
              if (iy < 0 || iy >= static_cast<long>(in.h)) continue;
              for (std::size_t kx = 0; kx < window; ++kx) {
                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(padding);
                if (ix < 0 || ix >= static_cast<long>(in.w)) continue;
                const std::size_t i = (static_cast<std::size_t>(iz) * in.h + static_cast<std::size_t>(iy)) * in.w +
                                      static_cast<std::size_t>(ix);
                if (!any || src[i] > best) {
                  best = src[i];
                  best_i = i;
                  any = true;
                }
              }
            }
          }
          const std::size_t o = nc * out.count() + (oz * out.h + oy) * out.w + ox;
          yd[o] = best;
          arg[o] = nc * in.count() + best_i;
        }
  }
  if (!tape.should_record({&x})) return y;
  tape.record("max_pool", y, [x, y, arg = std::move(arg)](const Tape& t) mutable {
    if (!t.wants_grad(x)) return;
    const auto gy = y.grad();
    auto gx = x.grad();
    for (std::size_t o = 0; o < gy.size(); ++o) gx[arg[o]] += gy[o];
  });
  return y;
}

Tensor avg_pool(Tape& tape, Tensor x, std::size_t window, std::size_t stride) {
  require_spatial(x, "avg_pool");
  const Spatial in = spatial_of(x);
  const bool flat = x.rank() == 4;
  const std::size_t kd = flat ? 1 : window, sd = flat ? 1 : stride;
  const Spatial out{pooled(in.d, kd, sd, 0), pooled(in.h, window, stride, 0),
                    pooled(in.w, window, stride, 0)};
  const std::size_t NC = x.dim(0) * x.dim(1);
  const double inv = 1.0 / static_cast<double>(kd * window * window);
  Tensor y(with_spatial(x, x.dim(1), out));
  auto yd = y.data();
  const auto xd = x.data();
  for (std::size_t nc = 0; nc < NC; ++nc) {
    const double* src = xd.data() + nc * in.count();
    for (std::size_t oz = 0; oz < out.d; ++oz)
      for (std::size_t oy = 0; oy < out.h; ++oy)
        for (std::size_t ox = 0; ox < out.w; ++ox) {
          double acc = 0.0;
          for (std::size_t kz = 0; kz < kd; ++kz)
            for (std::size_t ky = 0; ky < window; ++ky)
              for (std::size_t kx = 0; kx < window; ++kx)
                acc += src[((oz * sd + kz) * in.h + oy * stride + ky) * in.w + ox * stride + kx];
          yd[nc * out.count() + (oz * out.h + oy) * out.w + ox] = acc * inv;
        }
  }
  if (!tape.should_record({&x})) return y;
  tape.record("avg_pool", y, [x, y, in, out, NC, kd, sd, window, stride, inv](const Tape& t) mutable {
    if (!t.wants_grad(x)) return;
    const auto gy = y.grad();
    auto gx = x.grad();
    for (std::size_t nc = 0; nc < NC; ++nc) {
      double* dst = gx.data() + nc * in.count();
      for (std::size_t oz = 0; oz < out.d; ++oz)
        for (std::size_t oy = 0; oy < out.h; ++oy)
          for (std::size_t ox = 0; ox < out.w; ++ox) {
            const double gv = gy[nc * out.count() + (oz * out.h + oy) * out.w + ox] * inv;
            for (std::size_t kz = 0; kz < kd; ++kz)
              for (std::size_t ky = 0; ky < window; ++ky)
                for (std::size_t kx = 0; kx < window; ++kx)
                  dst[((oz * sd + kz) * in.h + oy * stride + ky) * in.w + ox * stride + kx] += gv;
          }
    }
  });
  return y;
}

Tensor concat_channels(Tape& tape, std::vector<Tensor> xs) {
  if (xs.empty()) fail(Errc::ShapeMismatch, "concat_channels needs at least one input");
  const Tensor& first = xs.front();
  if (first.rank() < 2) fail(Errc::ShapeMismatch, "concat_channels needs [N,C,...]");
  std::size_t channels = 0;
  for (const Tensor& x : xs) {
    if (x.rank() != first.rank() || x.dim(0) != first.dim(0))
      fail(Errc::ShapeMismatch, "concat_channels: " + to_string(x.shape()) + " vs " + to_string(first.shape()));
    for (std::size_t i = 2; i < x.rank(); ++i)
      if (x.dim(i) != first.dim(i))
        fail(Errc::ShapeMismatch, "concat_channels spatial mismatch: " + to_string(x.shape()) + " vs " +
                                      to_string(first.shape()));
    channels += x.dim(1);
  }
  Shape shape = first.shape();
  shape[1] = channels;
  Tensor y(shape);
  const std::size_t N = first.dim(0), S = plane(first);
  auto yd = y.data();
  for (std::size_t n = 0; n < N; ++n) {
    std::size_t offset = 0;
    for (const Tensor& x : xs) {
      const std::size_t c = x.dim(1);
      const auto xd = x.data();
      std::copy_n(xd.data() + n * c * S, c * S, yd.data() + (n * channels + offset) * S);
      offset += c;
    }
  }
  if (!tape.should_record(xs)) return y;
  tape.record("concat_channels", y, [xs, y, N, S, channels](const Tape& t) mutable {
    const auto gy = y.grad();
    std::size_t offset = 0;
    for (Tensor& x : xs) {
      const std::size_t c = x.dim(1);
      if (t.wants_grad(x)) {
        auto gx = x.grad();
        for (std::size_t n = 0; n < N; ++n) {
          const double* src = gy.data() + (n * channels + offset) * S;
          double* dst = gx.data() + n * c * S;
          for (std::size_t i = 0; i < c * S; ++i) dst[i] += src[i];
        }
      }
      offset += c;
    }
  });
  return y;
}

Tensor slice_channels(Tape& tape, Tensor x, std::size_t begin, std::size_t count) {
  if (x.rank() < 2 || count == 0 || begin + count > x.dim(1))
    fail(Errc::ShapeMismatch, "slice_channels [" + std::to_string(begin) + ", +" + std::to_string(count) +
                                  ") out of range for " + to_string(x.shape()));
  Shape shape = x.shape();
  const std::size_t C = shape[1], N = shape[0], S = plane(x);
  shape[1] = count;
  Tensor y(shape);
  const auto xd = x.data();
  auto yd = y.data();
  for (std::size_t n = 0; n < N; ++n)
    std::copy_n(xd.data() + (n * C + begin) * S, count * S, yd.data() + n * count * S);
  if (!tape.should_record({&x})) return y;
  tape.record("slice_channels", y, [x, y, begin, count, C, N, S](const Tape& t) mutable {
    if (!t.wants_grad(x)) return;
    const auto gy = y.grad();
    auto gx = x.grad();
    for (std::size_t n = 0; n < N; ++n) {
      const double* src = gy.data() + n * count * S;
      double* dst = gx.data() + (n * C + begin) * S;
      for (std::size_t i = 0; i < count * S; ++i) dst[i] += src[i];
    }
  });
  return y;
}

Tensor global_avg_pool(Tape& tape, Tensor x) {
  if (x.rank() < 3) fail(Errc::ShapeMismatch, "global_avg_pool needs [N,C,*spatial]");
  const std::size_t N = x.dim(0), C = x.dim(1), S = plane(x);
  Tensor y({N, C});
  const auto xd = x.data();
  auto yd = y.data();
  const double inv = 1.0 / static_cast<double>(S);
  for (std::size_t i = 0; i < N * C; ++i) {
    double acc = 0.0;
    for (std::size_t s = 0; s < S; ++s) acc += xd[i * S + s];
    yd[i] = acc * inv;
  }
  if (!tape.should_record({&x})) return y;
  tape.record("global_avg_pool", y, [x, y, N, C, S, inv](const Tape& t) mutable {
    if (!t.wants_grad(x)) return;
    const auto gy = y.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < N * C; ++i)
      for (std::size_t s = 0; s < S; ++s) gx[i * S + s] += gy[i] * inv;
  });
  return y;
}

Tensor concat_features(Tape& tape, Tensor a, Tensor b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0))
    fail(Errc::ShapeMismatch, "concat_features: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  const std::size_t N = a.dim(0), F1 = a.dim(1), F2 = b.dim(1);
  Tensor y({N, F1 + F2});
  auto yd = y.data();
  for (std::size_t n = 0; n < N; ++n) {
    std::copy_n(a.data().data() + n * F1, F1, yd.data() + n * (F1 + F2));
    std::copy_n(b.data().data() + n * F2, F2, yd.data() + n * (F1 + F2) + F1);
  }
  if (!tape.should_record({&a, &b})) return y;
  tape.record("concat_features", y, [a, b, y, N, F1, F2](const Tape& t) mutable {
    const auto gy = y.grad();
    if (t.wants_grad(a)) {
      auto ga = a.grad();
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t f = 0; f < F1; ++f) ga[n * F1 + f] += gy[n * (F1 + F2) + f];
    }
    if (t.wants_grad(b)) {
      auto gb = b.grad();
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t f = 0; f < F2; ++f) gb[n * F2 + f] += gy[n * (F1 + F2) + F1 + f];
    }
  });
  return y;
}

Tensor linear(Tape& tape, Tensor x, Tensor w, Tensor b) {
  if (x.rank() != 2 || w.rank() != 2 || w.dim(0) != x.dim(1))
    fail(Errc::ShapeMismatch, "linear: x " + to_string(x.shape()) + " vs W " + to_string(w.shape()));
  const std::size_t N = x.dim(0), F = x.dim(1), K = w.dim(1);
  if (b.defined() && (b.rank() != 1 || b.dim(0) != K))
    fail(Errc::ShapeMismatch, "linear bias must be [" + std::to_string(K) + "]");
  Tensor y({N, K});
  const auto xd = x.data();
  const auto wd = w.data();
  auto yd = y.data();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k) {
      double acc = 0.0;
      for (std::size_t f = 0; f < F; ++f) acc += xd[n * F + f] * wd[f * K + k];
      if (b.defined()) acc += b.data()[k];
      yd[n * K + k] = acc;
    }
  if (!tape.should_record({&x, &w, &b})) return y;
  tape.record("linear", y, [x, w, b, y, N, F, K](const Tape& t) mutable {
    const auto gy = y.grad();
    if (t.wants_grad(x)) {
      auto gx = x.grad();
      const auto wd = w.data();
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t f = 0; f < F; ++f) {
          double acc = 0.0;
          for (std::size_t k = 0; k < K; ++k) acc += gy[n * K + k] * wd[f * K + k];
          gx[n * F + f] += acc;
        }
    }
    if (t.wants_grad(w)) {
      auto gw = w.grad();
      const auto xd = x.data();
      for (std::size_t f = 0; f < F; ++f)
        for (std::size_t k = 0; k < K; ++k) {
          double acc = 0.0;
          for (std::size_t n = 0; n < N; ++n) acc += xd[n * F + f] * gy[n * K + k];
          gw[f * K + k] += acc;
        }
    }
    if (b.defined() && t.wants_grad(b)) {
      auto gb = b.grad();
      for (std::size_t k = 0; k < K; ++k) {
        double acc = 0.0;
        for (std::size_t n = 0; n < N; ++n) acc += gy[n * K + k];
        gb[k] += acc;
      }
    }
  });
  return y;
}

Tensor softmax(Tape& tape, Tensor z) {
  if (z.rank() != 2) fail(Errc::ShapeMismatch, "softmax needs [N,K], got " + to_string(z.shape()));
  const std::size_t N = z.dim(0), K = z.dim(1);
  Tensor y(z.shape());
  const auto zd = z.data();
  auto yd = y.data();
  for (std::size_t n = 0; n < N; ++n) {
    const double* r = zd.data() + n * K;
    const double m = *std::max_element(r, r + K);
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      yd[n * K + k] = std::exp(r[k] - m);
      total += yd[n * K + k];
    }
    for (std::size_t k = 0; k < K; ++k) yd[n * K + k] /= total;
  }
  if (!tape.should_record({&z})) return y;
  tape.record("softmax", y, [z, y, N, K](const Tape& t) mutable {
    if (!t.wants_grad(z)) return;
    const auto gy = y.grad();
    const auto yd = y.data();
    auto gz = z.grad();
    for (std::size_t n = 0; n < N; ++n) {
      double dot = 0.0;
      for (std::size_t k = 0; k < K; ++k) dot += gy[n * K + k] * yd[n * K + k];
      for (std::size_t k = 0; k < K; ++k) gz[n * K + k] += yd[n * K + k] * (gy[n * K + k] - dot);
    }
  });
  return y;
}

Tensor mul(Tape& tape, Tensor a, Tensor b) {
  require_same_shape(a, b, "mul");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y.data()[i] = a.data()[i] * b.data()[i];
  if (!tape.should_record({&a, &b})) return y;
  tape.record("mul", y, [a, b, y](const Tape& t) mutable {
    const auto gy = y.grad();
    if (t.wants_grad(a)) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * b.data()[i];
    }
    if (t.wants_grad(b)) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i] * a.data()[i];
    }
  });
  return y;
}

Tensor add(Tape& tape, Tensor a, Tensor b) {
  require_same_shape(a, b, "add");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y.data()[i] = a.data()[i] + b.data()[i];
  if (!tape.should_record({&a, &b})) return y;
  tape.record("add", y, [a, b, y](const Tape& t) mutable {
    accumulate_grad(t, a, y.grad());
    accumulate_grad(t, b, y.grad());
  });
  return y;
}

Tensor scale(Tape& tape, Tensor x, double factor) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y.data()[i] = x.data()[i] * factor;
  if (!tape.should_record({&x})) return y;
  tape.record("scale", y, [x, y, factor](const Tape& t) mutable {
    if (!t.wants_grad(x)) return;
    const auto gy = y.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * factor;
  });
  return y;
}

Tensor square(Tape& tape, Tensor x) { return mul(tape, x, x); }

Tensor sum(Tape& tape, Tensor x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor y = Tensor::scalar(acc);
  if (!tape.should_record({&x})) return y;
  tape.record("sum", y, [x, y](const Tape& t) mutable {
    if (!t.wants_grad(x)) return;
    const double g = y.grad()[0];
    for (double& v : x.grad()) v += g;
  });
  return y;
}

Tensor weighted_sum(Tape& tape, Tensor x, Tensor weights) {
  require_same_shape(x, weights, "weighted_sum");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) acc += x.data()[i] * weights.data()[i];
  Tensor y = Tensor::scalar(acc);
  if (!tape.should_record({&x})) return y;
  tape.record("weighted_sum", y, [x, weights, y](const Tape& t) mutable {
    if (!t.wants_grad(x)) return;
    const double g = y.grad()[0];
    auto gx = x.grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * weights.data()[i];
  });
  return y;
}

Tensor pick(Tape& tape, Tensor x, std::size_t n, std::size_t k) {
  if (x.rank() != 2 || n >= x.dim(0) || k >= x.dim(1))
    fail(Errc::ShapeMismatch, "pick(" + std::to_string(n) + "," + std::to_string(k) + ") out of range for " +
                                  to_string(x.shape()));
  const std::size_t i = n * x.dim(1) + k;
  Tensor y = Tensor::scalar(x.data()[i]);
  if (!tape.should_record({&x})) return y;
  tape.record("pick", y, [x, y, i](const Tape& t) mutable {
    if (t.wants_grad(x)) x.grad()[i] += y.grad()[0];
  });
  return y;
}

Tensor dropout(Tape& tape, Tensor x, double rate, Rng* rng) {
  if (rate < 0.0 || rate >= 1.0) fail(Errc::ConfigInvalid, "dropout rate must be in [0, 1)");
  if (rate == 0.0 || rng == nullptr) return x;
  Tensor mask(x.shape());
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask.data()) m = uniform01(*rng) < rate ? 0.0 : keep;
  return mul(tape, x, mask);
}

}  // namespace sahnet::tensor
