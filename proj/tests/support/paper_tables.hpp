#pragma once

// Per-class counts and printed cells of the supplementary per-class table
// and the macro-averaged model table. Column order: image-only model
// (best AUC, best F1, best loss, last), then image+metadata model (same).
// Undefined cells are NaN.

#include <array>
#include <cmath>
#include <limits>

#include "sahnet/eval/metrics.hpp"

namespace paper {

inline constexpr double kNA = std::numeric_limits<double>::quiet_NaN();
inline constexpr std::size_t kColumns = 8;

// Alive class as positive; the dead class swaps tp/tn and fp/fn.
inline const std::array<sahnet::eval::Counts, kColumns> kAliveCounts = {{
    {27, 2, 11, 3}, {25, 5, 8, 5}, {19, 11, 2, 11}, {22, 10, 3, 8},
    {29, 3, 10, 1}, {24, 9, 4, 6}, {23, 8, 5, 7}, {30, 0, 13, 0},
}};

inline sahnet::eval::Counts dead_counts(const sahnet::eval::Counts& alive) {
  return {alive.tn, alive.tp, alive.fn, alive.fp};
}

// Rows: sensitivity, specificity, precision, fpr, fnr, fdr, accuracy, f1.
using Cells = std::array<std::array<double, kColumns>, 8>;

inline const Cells kAlive = {{
    {0.90, 0.83, 0.63, 0.73, 0.97, 0.80, 0.77, 1.00},
    {0.15, 0.38, 0.85, 0.77, 0.23, 0.69, 0.62, 0.00},
    {0.71, 0.76, 0.90, 0.88, 0.74, 0.86, 0.82, 0.70},
    {0.85, 0.62, 0.15, 0.23, 0.77, 0.31, 0.38, 1.00},
    {0.10, 0.17, 0.37, 0.27, 0.03, 0.20, 0.23, 0.00},
    {0.29, 0.24, 0.10, 0.12, 0.26, 0.14, 0.18, 0.30},
    {0.67, 0.70, 0.70, 0.74, 0.74, 0.77, 0.72, 0.70},
    {0.79, 0.79, 0.75, 0.80, 0.84, 0.83, 0.79, 0.82},
}};

inline const Cells kDead = {{
    {0.15, 0.38, 0.85, 0.77, 0.23, 0.69, 0.62, 0.00},
    {0.90, 0.83, 0.63, 0.73, 0.97, 0.80, 0.77, 1.00},
    {0.40, 0.50, 0.50, 0.56, 0.75, 0.60, 0.53, kNA},
    {0.10, 0.17, 0.37, 0.27, 0.03, 0.20, 0.23, 0.00},
    {0.85, 0.62, 0.15, 0.23, 0.77, 0.31, 0.38, 1.00},
    {0.60, 0.50, 0.50, 0.44, 0.25, 0.40, 0.47, kNA},
    {0.67, 0.70, 0.70, 0.74, 0.74, 0.77, 0.72, 0.70},
    {0.22, 0.43, 0.63, 0.65, 0.35, 0.64, 0.57, 0.00},
}};

inline const Cells kMacro = {{
    {0.53, 0.61, 0.74, 0.75, 0.60, 0.75, 0.69, 0.50},
    {0.53, 0.61, 0.74, 0.75, 0.60, 0.75, 0.69, 0.50},
    {0.56, 0.63, 0.70, 0.72, 0.75, 0.73, 0.68, 0.35},
    {0.47, 0.39, 0.26, 0.25, 0.40, 0.25, 0.31, 0.50},
    {0.47, 0.39, 0.26, 0.25, 0.40, 0.25, 0.31, 0.50},
    {0.44, 0.37, 0.30, 0.28, 0.25, 0.27, 0.32, 0.15},
    {0.67, 0.70, 0.70, 0.74, 0.74, 0.77, 0.72, 0.70},
    {0.51, 0.61, 0.69, 0.72, 0.60, 0.74, 0.68, 0.41},
}};

// Macro-averaged counts: tp (= tn) and fp (= fn).
inline const std::array<double, kColumns> kMacroTp = {14.5, 15, 15, 16, 16, 16.5, 15.5, 15};
inline const std::array<double, kColumns> kMacroFp = {7, 6.5, 6.5, 5.5, 5.5, 5, 6, 6.5};

inline const sahnet::eval::Metric& row(const sahnet::eval::ClassMetrics& m, std::size_t r) {
  const sahnet::eval::Metric* rows[] = {&m.sensitivity, &m.specificity, &m.precision, &m.fpr,
                                        &m.fnr,         &m.fdr,         &m.accuracy,  &m.f1};
  return *rows[r];
}

inline const char* row_name(std::size_t r) {
  static const char* names[] = {"sensitivity", "specificity", "precision", "fpr", "fnr", "fdr", "accuracy", "f1"};
  return names[r];
}

// Printed cell matches the computed metric: both undefined, or equal after
// 2-dp rounding.
inline bool cell_matches(const sahnet::eval::Metric& m, double printed) {
  if (std::isnan(printed)) return !m.defined;
  return m.defined && sahnet::eval::round2(m.value) == printed;
}

}  // namespace paper
