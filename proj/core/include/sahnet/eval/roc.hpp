#pragma once

#include <vector>

namespace sahnet::eval {

/// Probability that a random positive outscores a random negative, ties
/// counted one half (Mann-Whitney with midranks). labels: 1 positive, 0
/// negative. Throws SingleClass, LengthMismatch.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct RocPoint {
  double threshold;  // predict positive when score >= threshold
  double fpr;
  double tpr;
};

/// Curve from (0,0) to (1,1), one point per distinct score, descending
/// threshold. Its trapezoidal area equals roc_auc.
std::vector<RocPoint> roc_curve(const std::vector<double>& scores, const std::vector<int>& labels);

double trapezoid_area(const std::vector<RocPoint>& curve);

}  // namespace sahnet::eval
