#pragma once

#include <vector>

namespace sahnet::eval {

/// a exposed/event, b exposed/no event, c unexposed/event, d unexposed/no event.
struct Contingency2x2 {
  double a = 0, b = 0, c = 0, d = 0;
  double total() const noexcept { return a + b + c + d; }
};

struct OddsResult {
  double or_value;
  double ci_low;
  double ci_high;
  bool corrected;  // 0.5 added to every cell because one was zero
};

/// Wald interval on the log scale.
OddsResult odds_ratio(const Contingency2x2& t, double z = 1.95996);

struct ChiSquareResult {
  double statistic;
  int dof;
  double p;
};

/// Pearson statistic without continuity correction. Throws DegenerateMargin.
ChiSquareResult chi_square(const Contingency2x2& t);

enum class TTestKind { Student, Welch };

struct TTestResult {
  double t;
  double dof;
  double p;  // two-sided
};

/// Throws TooSmall (a sample with < 2 values), ZeroVariance.
TTestResult t_test(const std::vector<double>& a, const std::vector<double>& b, TTestKind kind);

}  // namespace sahnet::eval
