#include "sahnet/eval/stats.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "sahnet/error.hpp"

namespace sahnet::eval {
namespace {

void check_table(const Contingency2x2& t) {
  for (double v : {t.a, t.b, t.c, t.d})
    if (!(v >= 0.0) || !std::isfinite(v)) fail(Errc::InvariantViolation, "contingency cells must be non-negative");
  if (t.total() <= 0.0) fail(Errc::InvariantViolation, "contingency table is empty");
}

double mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_var(const std::vector<double>& x, double m) {
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

}  // namespace

OddsResult odds_ratio(const Contingency2x2& t, double z) {
  check_table(t);
  Contingency2x2 u = t;
  const bool corrected = t.a == 0 || t.b == 0 || t.c == 0 || t.d == 0;
  if (corrected) u = {t.a + 0.5, t.b + 0.5, t.c + 0.5, t.d + 0.5};
  const double log_or = std::log(u.a) + std::log(u.d) - std::log(u.b) - std::log(u.c);
  const double se = std::sqrt(1.0 / u.a + 1.0 / u.b + 1.0 / u.c + 1.0 / u.d);
  return {std::exp(log_or), std::exp(log_or - z * se), std::exp(log_or + z * se), corrected};
}

ChiSquareResult chi_square(const Contingency2x2& t) {
  check_table(t);
  const double r1 = t.a + t.b, r2 = t.c + t.d, c1 = t.a + t.c, c2 = t.b + t.d;
  if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) fail(Errc::DegenerateMargin, "chi-square needs non-zero margins");
  const double diff = t.a * t.d - t.b * t.c;
  const double stat = t.total() * diff * diff / (r1 * r2 * c1 * c2);
  // Upper tail of chi-square(1): Q(1/2, x/2).
  const double p = boost::math::gamma_q(0.5, stat / 2.0);
  return {stat, 1, p};
}

TTestResult t_test(const std::vector<double>& a, const std::vector<double>& b, TTestKind kind) {
  if (a.size() < 2 || b.size() < 2) fail(Errc::TooSmall, "t-test needs at least 2 values per sample");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double ma = mean(a), mb = mean(b);
  const double va = sample_var(a, ma), vb = sample_var(b, mb);
  double t, dof;
  if (kind == TTestKind::Student) {
    dof = na + nb - 2.0;
    const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / dof;
    if (pooled == 0.0) {
      if (ma == mb) fail(Errc::ZeroVariance, "both samples are constant and equal");
      fail(Errc::ZeroVariance, "pooled variance is zero");
    }
    t = (ma - mb) / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  } else {
    const double sa = va / na, sb = vb / nb;
    if (sa + sb == 0.0) fail(Errc::ZeroVariance, "both samples are constant");
    t = (ma - mb) / std::sqrt(sa + sb);
    dof = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  }
  // Two-sided p = I_{dof/(dof+t^2)}(dof/2, 1/2).
  const double p = t == 0.0 ? 1.0 : boost::math::ibeta(dof / 2.0, 0.5, dof / (dof + t * t));
  return {t, dof, p};
}

}  // namespace sahnet::eval
