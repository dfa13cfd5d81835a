#include <algorithm>

#include "sahnet/error.hpp"
#include "sahnet/tensor/ops.hpp"

namespace sahnet::tensor {
namespace {

struct Geometry {
  std::size_t n, ci, co;
  std::size_t d, h, w;        // input spatial
  std::size_t kd, kh, kw;     // kernel
  std::size_t sd, sh, sw;     // stride
  std::size_t pd, ph, pw;     // padding
  std::size_t od, oh, ow;     // output spatial
  std::size_t spatial_rank;

  std::size_t in_plane() const { return d * h * w; }
  std::size_t out_plane() const { return od * oh * ow; }
  std::size_t taps() const { return kd * kh * kw; }
  std::size_t k() const { return ci * taps(); }
  bool pointwise() const {
    return taps() == 1 && sd == 1 && sh == 1 && sw == 1 && pd == 0 && ph == 0 && pw == 0;
  }
};

std::size_t out_extent(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
  if (s == 0) fail(Errc::ShapeMismatch, "conv stride must be positive");
  if (in + 2 * p < k) fail(Errc::ShapeMismatch, "conv kernel does not fit the padded input");
  return (in + 2 * p - k) / s + 1;
}

std::vector<std::size_t> per_axis(const std::vector<std::size_t>& v, std::size_t rank,
                                  const char* what) {
  if (v.size() == 1) return std::vector<std::size_t>(rank, v[0]);
  if (v.size() != rank)
    fail(Errc::ShapeMismatch, std::string("conv ") + what + " needs one value per spatial axis");
  return v;
}

Geometry geometry(const Tensor& x, const Tensor& w, const Tensor& b,
                  const std::vector<std::size_t>& stride,
                  const std::vector<std::size_t>& padding) {
  const std::size_t rank = x.rank();
  if (rank != 4 && rank != 5) fail(Errc::RankUnsupported, "conv_nd needs 2 or 3 spatial dims, got input " + to_string(x.shape()));
  if (w.rank() != rank) fail(Errc::ShapeMismatch, "conv weight rank does not match input");
  if (w.dim(1) != x.dim(1))
    fail(Errc::ShapeMismatch, "conv input channels " + std::to_string(x.dim(1)) +
                                  " vs weight " + to_string(w.shape()));
  if (b.defined() && (b.rank() != 1 || b.dim(0) != w.dim(0)))
    fail(Errc::ShapeMismatch, "conv bias must be [C_out]");
  const std::size_t sr = rank - 2;
  auto s = per_axis(stride, sr, "stride");
  auto p = per_axis(padding, sr, "padding");
  if (sr == 2) {
    s.insert(s.begin(), 1);
    p.insert(p.begin(), 0);
  }
  Geometry g{};
  g.spatial_rank = sr;
  g.n = x.dim(0);
  g.ci = x.dim(1);
  g.co = w.dim(0);
  g.d = sr == 3 ? x.dim(2) : 1;
  g.h = x.dim(rank - 2);
  g.w = x.dim(rank - 1);
  g.kd = sr == 3 ? w.dim(2) : 1;
  g.kh = w.dim(rank - 2);
  g.kw = w.dim(rank - 1);
  g.sd = s[0], g.sh = s[1], g.sw = s[2];
  g.pd = p[0], g.ph = p[1], g.pw = p[2];
  g.od = out_extent(g.d, g.kd, g.sd, g.pd);
  g.oh = out_extent(g.h, g.kh, g.sh, g.ph);
  g.ow = out_extent(g.w, g.kw, g.sw, g.pw);
  return g;
}

Shape out_shape(const Geometry& g) {
  if (g.spatial_rank == 2) return {g.n, g.co, g.oh, g.ow};
  return {g.n, g.co, g.od, g.oh, g.ow};
}

// Input coordinate for output index o and tap k along one axis; -1 when it
// lands in the padding.
inline long tap(std::size_t o, std::size_t k, std::size_t s, std::size_t p, std::size_t extent) {
  const long i = static_cast<long>(o * s + k) - static_cast<long>(p);
  return (i < 0 || i >= static_cast<long>(extent)) ? -1 : i;
}

// col[k][p] for one sample; k runs over (ci, kz, ky, kx).
void im2col(const Geometry& g, const double* x, std::vector<double>& col) {
  const std::size_t P = g.out_plane();
  col.assign(g.k() * P, 0.0);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.ci; ++c) {
    const double* xc = x + c * g.in_plane();
    for (std::size_t kz = 0; kz < g.kd; ++kz)
      for (std::size_t ky = 0; ky < g.kh; ++ky)
        for (std::size_t kx = 0; kx < g.kw; ++kx, ++row) {
          double* dst = col.data() + row * P;
          for (std::size_t oz = 0; oz < g.od; ++oz) {
            const long iz = tap(oz, kz, g.sd, g.pd, g.d);
            if (iz < 0) continue;
            for (std::size_t oy = 0; oy < g.oh; ++oy) {
              const long iy = tap(oy, ky, g.sh, g.ph, g.h);
              if (iy < 0) continue;
              const double* src = xc + (static_cast<std::size_t>(iz) * g.h + static_cast<std::size_t>(iy)) * g.w;
              double* out = dst + (oz * g.oh + oy) * g.ow;
              for (std::size_t ox = 0; ox < g.ow; ++ox) {
                const long ix = tap(ox, kx, g.sw, g.pw, g.w);
                if (ix >= 0) out[ox] = src[ix];
              }
            }
          }
        }
  }
}

void col2im(const Geometry& g, const std::vector<double>& col, double* dx) {
  const std::size_t P = g.out_plane();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.ci; ++c) {
    double* xc = dx + c * g.in_plane();
    for (std::size_t kz = 0; kz < g.kd; ++kz)
      for (std::size_t ky = 0; ky < g.kh; ++ky)
        for (std::size_t kx = 0; kx < g.kw; ++kx, ++row) {
          const double* src = col.data() + row * P;
          for (std::size_t oz = 0; oz < g.od; ++oz) {
            const long iz = tap(oz, kz, g.sd, g.pd, g.d);
            if (iz < 0) continue;
            for (std::size_t oy = 0; oy < g.oh; ++oy) {
              const long iy = tap(oy, ky, g.sh, g.ph, g.h);
              if (iy < 0) continue;
              double* dst = xc + (static_cast<std::size_t>(iz) * g.h + static_cast<std::size_t>(iy)) * g.w;
              const double* in = src + (oz * g.oh + oy) * g.ow;
              for (std::size_t ox = 0; ox < g.ow; ++ox) {
                const long ix = tap(ox, kx, g.sw, g.pw, g.w);
                if (ix >= 0) dst[ix] += in[ox];
              }
            }
          }
        }
  }
}

void forward_reference(const Geometry& g, const double* x, const double* w, double* y) {
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t co = 0; co < g.co; ++co)
      for (std::size_t oz = 0; oz < g.od; ++oz)
        for (std::size_t oy = 0; oy < g.oh; ++oy)
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            double acc = 0.0;
            for (std::size_t c = 0; c < g.ci; ++c)
              for (std::size_t kz = 0; kz < g.kd; ++kz)
                for (std::size_t ky = 0; ky < g.kh; ++ky)
                  for (std::size_t kx = 0; kx < g.kw; ++kx) {
                    const long iz = tap(oz, kz, g.sd, g.pd, g.d);
                    const long iy = tap(oy, ky, g.sh, g.ph, g.h);
                    const long ix = tap(ox, kx, g.sw, g.pw, g.w);
                    if (iz < 0 || iy < 0 || ix < 0) continue;
                    const double xv = x[((n * g.ci + c) * g.d + static_cast<std::size_t>(iz)) * g.h * g.w +
                                        static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)];
                    const double wv = w[(((co * g.ci + c) * g.kd + kz) * g.kh + ky) * g.kw + kx];
                    acc += xv * wv;
                  }
            y[((n * g.co + co) * g.od + oz) * g.oh * g.ow + oy * g.ow + ox] = acc;
          }
}

void forward_direct(const Geometry& g, const double* x, const double* w, double* y) {
  const std::size_t P = g.out_plane();
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t co = 0; co < g.co; ++co) {
      double* out = y + (n * g.co + co) * P;
      std::fill(out, out + P, 0.0);
      for (std::size_t c = 0; c < g.ci; ++c) {
        const double* xc = x + (n * g.ci + c) * g.in_plane();
        for (std::size_t kz = 0; kz < g.kd; ++kz)
          for (std::size_t ky = 0; ky < g.kh; ++ky)
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
              const double wv = w[(((co * g.ci + c) * g.kd + kz) * g.kh + ky) * g.kw + kx];
              for (std::size_t oz = 0; oz < g.od; ++oz) {
                const long iz = tap(oz, kz, g.sd, g.pd, g.d);
                if (iz < 0) continue;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                  const long iy = tap(oy, ky, g.sh, g.ph, g.h);
                  if (iy < 0) continue;
                  const double* src = xc + (static_cast<std::size_t>(iz) * g.h + static_cast<std::size_t>(iy)) * g.w;
                  double* row = out + (oz * g.oh + oy) * g.ow;
                  for (std::size_t ox = 0; ox < g.ow; ++ox) {
                    const long ix = tap(ox, kx, g.sw, g.pw, g.w);
                    if (ix >= 0) row[ox] += wv * src[ix];
                  }
                }
              }
            }
      }
    }
}

// out[co][p] = sum_k w[co][k] * col[k][p], k ascending.
void gemm_wc(const Geometry& g, const double* w, const double* col, double* out) {
  const std::size_t P = g.out_plane(), K = g.k();
  for (std::size_t co = 0; co < g.co; ++co) {
    double* o = out + co * P;
    std::fill(o, o + P, 0.0);
    const double* wr = w + co * K;
    for (std::size_t k = 0; k < K; ++k) {
      const double wv = wr[k];
      const double* cr = col + k * P;
      for (std::size_t p = 0; p < P; ++p) o[p] += wv * cr[p];
    }
  }
}

void forward_im2col(const Geometry& g, const double* x, const double* w, double* y) {
  std::vector<double> col;
  const std::size_t P = g.out_plane();
  for (std::size_t n = 0; n < g.n; ++n) {
    const double* xn = x + n * g.ci * g.in_plane();
    const double* src = xn;
    if (!g.pointwise()) {
      im2col(g, xn, col);
      src = col.data();
    }
    gemm_wc(g, w, src, y + n * g.co * P);
  }
}

}  // namespace

Tensor conv_nd(Tape& tape, Tensor x, Tensor w, Tensor b,
               const std::vector<std::size_t>& stride,
               const std::vector<std::size_t>& padding, ConvAlgo algo) {
  const Geometry g = geometry(x, w, b, stride, padding);
  Tensor y(out_shape(g));
  const double* xd = x.data().data();
  const double* wd = w.data().data();
  double* yd = y.data().data();
  switch (algo) {
    case ConvAlgo::Reference: forward_reference(g, xd, wd, yd); break;
    case ConvAlgo::Direct: forward_direct(g, xd, wd, yd); break;
    case ConvAlgo::Im2col: forward_im2col(g, xd, wd, yd); break;
  }
  const std::size_t P = g.out_plane();
  if (b.defined()) {
    const auto bd = b.data();
    for (std::size_t n = 0; n < g.n; ++n)
      for (std::size_t co = 0; co < g.co; ++co) {
        double* o = yd + (n * g.co + co) * P;
        for (std::size_t p = 0; p < P; ++p) o[p] += bd[co];
      }
  }

  if (!tape.should_record({&x, &w, &b})) return y;
  tape.record("conv_nd", y, [g, x, w, b, y](const Tape& t) mutable {
    const auto gy = y.grad();
    const std::size_t P = g.out_plane(), K = g.k();
    if (b.defined() && t.wants_grad(b)) {
      auto gb = b.grad();
      for (std::size_t n = 0; n < g.n; ++n)
        for (std::size_t co = 0; co < g.co; ++co) {
          const double* r = gy.data() + (n * g.co + co) * P;
          double acc = 0.0;
          for (std::size_t p = 0; p < P; ++p) acc += r[p];
          gb[co] += acc;
        }
    }
    const bool need_w = t.wants_grad(w), need_x = t.wants_grad(x);
    if (!need_w && !need_x) return;
    std::vector<double> col, dcol;
    const double* wd = w.data().data();
    for (std::size_t n = 0; n < g.n; ++n) {
      const double* gyn = gy.data() + n * g.co * P;
      if (need_w) {
        const double* xn = x.data().data() + n * g.ci * g.in_plane();
        const double* src = xn;
        if (!g.pointwise()) {
          im2col(g, xn, col);
          src = col.data();
        }
        auto gw = w.grad();
        for (std::size_t co = 0; co < g.co; ++co) {
          const double* r = gyn + co * P;
          for (std::size_t k = 0; k < K; ++k) {
            const double* cr = src + k * P;
            double acc = 0.0;
            for (std::size_t p = 0; p < P; ++p) acc += r[p] * cr[p];
            gw[co * K + k] += acc;
          }
        }
      }
      if (need_x) {
        dcol.assign(K * P, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
          double* dr = dcol.data() + k * P;
          for (std::size_t co = 0; co < g.co; ++co) {
            const double wv = wd[co * K + k];
            const double* r = gyn + co * P;
            for (std::size_t p = 0; p < P; ++p) dr[p] += wv * r[p];
          }
        }
        double* gx = x.grad().data() + n * g.ci * g.in_plane();
        if (g.pointwise()) {
          for (std::size_t i = 0; i < K * P; ++i) gx[i] += dcol[i];
        } else {
          col2im(g, dcol, gx);
        }
      }
    }
  });
  return y;
}

}  // namespace sahnet::tensor
