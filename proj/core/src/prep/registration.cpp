#include "sahnet/prep/registration.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "sahnet/error.hpp"
#include "sahnet/volio/resample.hpp"

namespace sahnet::prep {
namespace {

using volio::Mat4;
using volio::Shape3;
using volio::Vec3;
using volio::Volume;

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

struct EulerParts {
  Mat3 rx, ry, rz, drx, dry, drz;
};

EulerParts euler_parts(double ax, double ay, double az) {
  const double cx = std::cos(ax), sx = std::sin(ax);
  const double cy = std::cos(ay), sy = std::sin(ay);
  const double cz = std::cos(az), sz = std::sin(az);
  EulerParts e;
  e.rx = {{{1, 0, 0}, {0, cx, -sx}, {0, sx, cx}}};
  e.ry = {{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
  e.rz = {{{cz, -sz, 0}, {sz, cz, 0}, {0, 0, 1}}};
  e.drx = {{{0, 0, 0}, {0, -sx, -cx}, {0, cx, -sx}}};
  e.dry = {{{-sy, 0, cy}, {0, 0, 0}, {-cy, 0, -sy}}};
  e.drz = {{{-sz, -cz, 0}, {cz, -sz, 0}, {0, 0, 0}}};
  return e;
}

// Transform parameters: Rigid = (rx, ry, rz, tx, ty, tz); Affine = nine
// row-major matrix entries then (tx, ty, tz). The linear part acts about
// `centre`.
struct Model {
  TransformKind kind;
  Vec3 centre;
  double radius;  // mm per unit of rotation / matrix parameter when scaled

  std::size_t size() const { return kind == TransformKind::Affine ? 12 : 6; }
  std::size_t linear_count() const { return kind == TransformKind::Affine ? 9 : 3; }

  std::vector<double> identity() const {
    std::vector<double> p(size(), 0.0);
    if (kind == TransformKind::Affine) p[0] = p[4] = p[8] = 1.0;
    return p;
  }

  Mat3 linear(const std::vector<double>& p) const {
    if (kind == TransformKind::Affine)
      return {{{p[0], p[1], p[2]}, {p[3], p[4], p[5]}, {p[6], p[7], p[8]}}};
    const auto e = euler_parts(p[0], p[1], p[2]);
    return mat3_mul(e.rz, mat3_mul(e.ry, e.rx));
  }

  Mat4 matrix(const std::vector<double>& p) const {
    const Mat3 a = linear(p);
    const std::size_t t0 = linear_count();
    Mat4 m = Mat4::identity();
    for (int i = 0; i < 3; ++i) {
      double ac = 0.0;
      for (int j = 0; j < 3; ++j) {
        m(i, j) = a[i][j];
        ac += a[i][j] * centre[j];
      }
      m(i, 3) = centre[i] + p[t0 + i] - ac;
    }
    return m;
  }
};

// Trilinear sample and its gradient with respect to voxel coordinates.
double sample_grad(const Volume& v, double x, double y, double z, Vec3& g) {
  g = {0.0, 0.0, 0.0};
  const Shape3 s = v.shape();
  auto axis = [](double c, std::size_t n, std::size_t& i0, std::size_t& i1, double& f) {
    if (c < 0.0 || c > static_cast<double>(n - 1)) return false;
    if (n == 1) {
      i0 = i1 = 0;
      f = 0.0;
      return true;
    }
    auto fl = static_cast<std::size_t>(std::floor(c));
    if (fl >= n - 1) fl = n - 2;
    i0 = fl;
    i1 = fl + 1;
    f = c - static_cast<double>(fl);
    return true;
  };
  std::size_t x0, x1, y0, y1, z0, z1;
  double fx, fy, fz;
  if (!axis(x, s.nx, x0, x1, fx) || !axis(y, s.ny, y0, y1, fy) || !axis(z, s.nz, z0, z1, fz))
    return 0.0;
  const double c000 = v.at(x0, y0, z0), c100 = v.at(x1, y0, z0);
  const double c010 = v.at(x0, y1, z0), c110 = v.at(x1, y1, z0);
  const double c001 = v.at(x0, y0, z1), c101 = v.at(x1, y0, z1);
  const double c011 = v.at(x0, y1, z1), c111 = v.at(x1, y1, z1);
  const double c00 = c000 + fx * (c100 - c000), c10 = c010 + fx * (c110 - c010);
  const double c01 = c001 + fx * (c101 - c001), c11 = c011 + fx * (c111 - c011);
  const double c0 = c00 + fy * (c10 - c00), c1 = c01 + fy * (c11 - c01);
  if (s.nx > 1) {
    const double d00 = c100 - c000, d10 = c110 - c010, d01 = c101 - c001, d11 = c111 - c011;
    const double d0 = d00 + fy * (d10 - d00), d1 = d01 + fy * (d11 - d01);
    g[0] = d0 + fz * (d1 - d0);
  }
  if (s.ny > 1) g[1] = (c10 - c00) + fz * ((c11 - c01) - (c10 - c00));
  if (s.nz > 1) g[2] = c1 - c0;
  return c0 + fz * (c1 - c0);
}

struct Evaluation {
  double f = 0.0;
  std::vector<double> grad;
};

Evaluation evaluate(const Volume& moving, const Volume& fixed, const Model& model,
                    const std::vector<double>& p, bool want_grad) {
  const Mat4 t = model.matrix(p);
  const Mat4 minv = volio::inverse_affine(moving.affine());
  const Mat4 k = minv * t * fixed.affine();

  EulerParts e{};
  std::array<Mat3, 3> dr{};
  if (model.kind != TransformKind::Affine) {
    e = euler_parts(p[0], p[1], p[2]);
    dr[0] = mat3_mul(e.rz, mat3_mul(e.ry, e.drx));
    dr[1] = mat3_mul(e.rz, mat3_mul(e.dry, e.rx));
    dr[2] = mat3_mul(e.drz, mat3_mul(e.ry, e.rx));
  }

  Evaluation out;
  out.grad.assign(model.size(), 0.0);
  const Shape3 s = fixed.shape();
  const auto fdata = fixed.data();
  std::size_t idx = 0;
  for (std::size_t z = 0; z < s.nz; ++z)
    for (std::size_t y = 0; y < s.ny; ++y)
      for (std::size_t x = 0; x < s.nx; ++x, ++idx) {
        const Vec3 v{static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
        const Vec3 q = volio::apply(k, v);
        Vec3 gv;
        const double m = sample_grad(moving, q[0], q[1], q[2], gv);
        const double r = m - fdata[idx];
        out.f += r * r;
        if (!want_grad || (gv[0] == 0.0 && gv[1] == 0.0 && gv[2] == 0.0)) continue;
        // World-space gradient of the moving image.
        Vec3 gw{};
        for (int i = 0; i < 3; ++i)
          gw[i] = minv(0, i) * gv[0] + minv(1, i) * gv[1] + minv(2, i) * gv[2];
        const Vec3 pw = volio::apply(fixed.affine(), v);
        const Vec3 d{pw[0] - model.centre[0], pw[1] - model.centre[1], pw[2] - model.centre[2]};
        const std::size_t t0 = model.linear_count();
        for (int i = 0; i < 3; ++i) out.grad[t0 + i] += r * gw[i];
        if (model.kind == TransformKind::Affine) {
          for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) out.grad[3 * i + j] += r * gw[i] * d[j];
        } else {
          for (int a = 0; a < 3; ++a) {
            double dot = 0.0;
            for (int i = 0; i < 3; ++i)
              dot += gw[i] * (dr[a][i][0] * d[0] + dr[a][i][1] * d[1] + dr[a][i][2] * d[2]);
            out.grad[a] += r * dot;
          }
        }
      }
  const double n = static_cast<double>(s.size());
  out.f /= n;
  for (auto& g : out.grad) g *= 2.0 / n;
  return out;
}

bool is_constant(const Volume& v) {
  const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
  return *lo == *hi;
}

}  // namespace

bool AffineTransform::valid(double tol) const {
  if (!volio::has_affine_bottom_row(matrix)) return false;
  if (kind != TransformKind::Rigid) return true;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += matrix(k, i) * matrix(k, j);
      if (std::abs(dot - (i == j ? 1.0 : 0.0)) > tol) return false;
    }
  return std::abs(volio::det3(matrix) - 1.0) <= tol;
}

Mat4 euler_rotation(double rx, double ry, double rz) {
  const auto e = euler_parts(rx, ry, rz);
  const Mat3 r = mat3_mul(e.rz, mat3_mul(e.ry, e.rx));
  Mat4 m = Mat4::identity();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = r[i][j];
  return m;
}

Volume downsample(const Volume& v, std::size_t factor) {
  const Shape3 s = v.shape();
  if (factor <= 1) return v;
  const std::size_t fx = std::min(factor, s.nx), fy = std::min(factor, s.ny),
                    fz = std::min(factor, s.nz);
  const Shape3 o{s.nx / fx, s.ny / fy, s.nz / fz};
  std::vector<float> out(o.size(), 0.0f);
  const double norm = 1.0 / static_cast<double>(fx * fy * fz);
  std::size_t idx = 0;
  for (std::size_t z = 0; z < o.nz; ++z)
    for (std::size_t y = 0; y < o.ny; ++y)
      for (std::size_t x = 0; x < o.nx; ++x, ++idx) {
        double acc = 0.0;
        for (std::size_t dz = 0; dz < fz; ++dz)
          for (std::size_t dy = 0; dy < fy; ++dy)
            for (std::size_t dx = 0; dx < fx; ++dx)
              acc += v.at(x * fx + dx, y * fy + dy, z * fz + dz);
        out[idx] = static_cast<float>(acc * norm);
      }
  Mat4 block = Mat4::diagonal(double(fx), double(fy), double(fz));
  block(0, 3) = (double(fx) - 1.0) / 2.0;
  block(1, 3) = (double(fy) - 1.0) / 2.0;
  block(2, 3) = (double(fz) - 1.0) / 2.0;
  return Volume(o, v.affine() * block, std::move(out), v.unit());
}

double transformed_mse(const Volume& moving, const Volume& fixed, const Mat4& transform) {
  const Volume r = volio::resample_mapped(moving, transform * fixed.affine(), fixed.affine(),
                                          fixed.shape());
  double acc = 0.0;
  const auto a = r.data(), b = fixed.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

RegistrationResult register_affine(const Volume& moving, const Volume& fixed,
                                   const RegistrationOptions& opts) {
  if (is_constant(moving) || is_constant(fixed))
    fail(Errc::DegenerateInput, "registration inputs must not be constant");
  if (opts.levels < 1 || opts.levels > 3 || opts.iters_per_level < 0)
    fail(Errc::ConfigInvalid, "registration needs 1-3 levels and non-negative iterations");

  const Shape3 fs = fixed.shape();
  const Vec3 centre = volio::apply(fixed.affine(), {(double(fs.nx) - 1) / 2,
                                                    (double(fs.ny) - 1) / 2,
                                                    (double(fs.nz) - 1) / 2});
  const Vec3 spacing = volio::column_norms(fixed.affine());
  const double radius =
      std::max(1.0, 0.5 * std::max({double(fs.nx) * spacing[0], double(fs.ny) * spacing[1],
                                    double(fs.nz) * spacing[2]}));

  RegistrationResult result{{}, fixed, {}};
  if (opts.kind == TransformKind::Identity) {
    result.transform = {Mat4::identity(), TransformKind::Identity};
    result.registered = volio::resample_mapped(moving, fixed.affine(), fixed.affine(), fs);
    const double mse = transformed_mse(moving, fixed, Mat4::identity());
    result.diagnostics = {mse, mse, 0, {}, {}, true};
    return result;
  }

  const Model model{opts.kind, centre, radius};
  std::vector<double> params = model.identity();
  auto& diag = result.diagnostics;
  diag.initial_mse = evaluate(moving, fixed, model, params, false).f;
  diag.converged = true;

  const std::array<std::size_t, 3> factors{4, 2, 1};
  for (int level = 3 - opts.levels; level < 3; ++level) {
    const std::size_t factor = factors[static_cast<std::size_t>(level)];
    const Volume m = downsample(moving, factor);
    const Volume f = downsample(fixed, factor);
    const double level_spacing = volio::column_norms(f.affine())[0];
    double step = opts.step_mm > 0 ? opts.step_mm : level_spacing;
    const double max_step = step;
    const bool finest = level == 2;

    Evaluation cur = evaluate(m, f, model, params, true);
    if (finest) diag.accepted_objective.push_back(cur.f);
    int iters = 0;
    bool level_converged = false;
    while (iters < opts.iters_per_level) {
      // Descent in scaled coordinates: linear parameters carry `radius` mm
      // per unit so one step length means roughly one displacement length.
      std::vector<double> scaled(cur.grad);
      for (std::size_t i = 0; i < model.linear_count(); ++i) scaled[i] /= radius;
      double norm = 0.0;
      for (double g : scaled) norm += g * g;
      norm = std::sqrt(norm);
      if (norm == 0.0) {
        level_converged = true;
        break;
      }
      ++iters;
      std::vector<double> trial(params);
      for (std::size_t i = 0; i < trial.size(); ++i) {
        const double scale = i < model.linear_count() ? 1.0 / radius : 1.0;
        trial[i] -= step * scaled[i] / norm * scale;
      }
      Evaluation next = evaluate(m, f, model, trial, true);
      if (next.f < cur.f) {
        params = std::move(trial);
        cur = std::move(next);
        if (finest) diag.accepted_objective.push_back(cur.f);
        step = std::min(step * 1.2, max_step);
      } else {
        step *= 0.5;
        if (step < opts.min_step_mm) {
          level_converged = true;
          break;
        }
      }
    }
    diag.iterations_per_level.push_back(iters);
    diag.iterations += iters;
    diag.converged = level_converged;
  }

  result.transform = {model.matrix(params), opts.kind};
  diag.final_mse = evaluate(moving, fixed, model, params, false).f;
  if (diag.final_mse > diag.initial_mse) {
    // Coarse levels optimise a different objective; never return worse than
    // the starting point at full resolution.
    params = model.identity();
    result.transform = {model.matrix(params), opts.kind};
    diag.final_mse = diag.initial_mse;
  }
  result.registered = volio::resample_mapped(moving, result.transform.matrix * fixed.affine(),
                                              fixed.affine(), fs);
  return result;
}

}  // namespace sahnet::prep
