#pragma once

#include "ccast/common.hpp"
#include "ccast/hierarchy.hpp"

#include <string>
#include <vector>

namespace ccast {

// Entries whose ground truth is below this magnitude are excluded from the
// relative metrics and counted instead of clamped.
inline constexpr double kMetricDenomFloor = 1e-12;

struct EvalReport {
  double mape = 0.0;
  double w_mape = 0.0;
  double co_mape = 0.0;
  std::vector<double> mape_per_level;    // length = number of levels
  std::vector<double> w_mape_per_level;  // length = number of levels
  int excluded_mape = 0;                 // |truth| under the floor
  int excluded_co = 0;                   // |parent value| under the floor
  std::string to_json() const;
};

// (1/n) sum |truth_i - forecast_i| / |truth_i| over included entries.
double mape(const Vec& truth, const Vec& forecast, int* excluded = nullptr);

// sum |truth_i| * |forecast_i - truth_i| / sum |truth_j|; scales linearly
// with the data (it is a level-scale weighted absolute error).
double w_mape(const Vec& truth, const Vec& forecast);

// (1/r) sum over non-leaf i of |y_i - sum_children y_j| / |y_i|.
double co_mape(const Vec& y, const Hierarchy& h, int* excluded = nullptr);

// Multi-step panels (n x steps): entries pooled across steps; per-level rows
// restricted to that level's nodes. Used by `evaluate` and the train loop.
EvalReport evaluate_panel(const Mat& truth, const Mat& forecast, const Hierarchy& h);

}  // namespace ccast
