#include "ccast/metrics.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace ccast {

namespace {

struct RelAccum {
  double sum = 0.0;
  long included = 0;
  int excluded = 0;
  void add(double truth, double forecast) {
    if (std::abs(truth) < kMetricDenomFloor) {
      ++excluded;
      return;
    }
    sum += std::abs(truth - forecast) / std::abs(truth);
    ++included;
  }
  double mean(Errc on_empty, const char* what) const {
    require(included > 0, on_empty, what);
    return sum / static_cast<double>(included);
  }
};

}  // namespace

double mape(const Vec& truth, const Vec& forecast, int* excluded) {
  require(truth.size() == forecast.size(), Errc::dimension_mismatch, "mape input lengths differ");
  RelAccum acc;
  for (Eigen::Index i = 0; i < truth.size(); ++i) acc.add(truth[i], forecast[i]);
  if (excluded) *excluded = acc.excluded;
  return acc.mean(Errc::zero_denominator, "all ground-truth entries are (near) zero");
}

double w_mape(const Vec& truth, const Vec& forecast) {
  require(truth.size() == forecast.size(), Errc::dimension_mismatch,
          "w_mape input lengths differ");
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    num += std::abs(truth[i]) * std::abs(forecast[i] - truth[i]);
    den += std::abs(truth[i]);
  }
  require(den >= kMetricDenomFloor, Errc::zero_weight_sum, "ground-truth weights sum to zero");
  return num / den;
}

double co_mape(const Vec& y, const Hierarchy& h, int* excluded) {
  require(y.size() == h.n(), Errc::dimension_mismatch, "co_mape vector length != node count");
  require(h.r() > 0, Errc::no_upper_nodes, "hierarchy has no aggregated nodes");
  RelAccum acc;
  for (int i = 0; i < h.r(); ++i) {
    double child_sum = 0.0;
    for (int c : h.children(i)) child_sum += y[c];
    acc.add(y[i], child_sum);
  }
  if (excluded) *excluded = acc.excluded;
  return acc.mean(Errc::zero_denominator, "all aggregated entries are (near) zero");
}

EvalReport evaluate_panel(const Mat& truth, const Mat& forecast, const Hierarchy& h) {
  require(truth.rows() == h.n() && forecast.rows() == h.n() && truth.cols() == forecast.cols(),
          Errc::dimension_mismatch, "panel shapes disagree with the hierarchy");
  EvalReport rep;
  RelAccum overall;
  double wnum = 0.0, wden = 0.0;
  std::vector<RelAccum> by_level(h.num_levels());
  std::vector<double> wnum_l(h.num_levels(), 0.0), wden_l(h.num_levels(), 0.0);
  for (int i = 0; i < h.n(); ++i) {
    const int l = h.level(i) - 1;
    for (Eigen::Index t = 0; t < truth.cols(); ++t) {
      const double tv = truth(i, t), fv = forecast(i, t);
      overall.add(tv, fv);
      by_level[l].add(tv, fv);
      const double w = std::abs(tv), e = std::abs(fv - tv);
      wnum += w * e;
      wden += w;
      wnum_l[l] += w * e;
      wden_l[l] += w;
    }
  }
  rep.mape = overall.mean(Errc::zero_denominator, "all ground-truth entries are (near) zero");
  rep.excluded_mape = overall.excluded;
  require(wden >= kMetricDenomFloor, Errc::zero_weight_sum, "ground-truth weights sum to zero");
  rep.w_mape = wnum / wden;
  for (int l = 0; l < h.num_levels(); ++l) {
    rep.mape_per_level.push_back(by_level[l].included > 0
                                     ? by_level[l].sum / by_level[l].included
                                     : 0.0);
    rep.w_mape_per_level.push_back(wden_l[l] >= kMetricDenomFloor ? wnum_l[l] / wden_l[l] : 0.0);
  }
  if (h.r() > 0) {
    RelAccum co;
    for (Eigen::Index t = 0; t < forecast.cols(); ++t) {
      for (int i = 0; i < h.r(); ++i) {
        double child_sum = 0.0;
        for (int c : h.children(i)) child_sum += forecast(c, t);
        co.add(forecast(i, t), child_sum);
      }
    }
    rep.co_mape = co.included > 0 ? co.sum / co.included : 0.0;
    rep.excluded_co = co.excluded;
  }
  return rep;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["mape"] = mape;
  j["w_mape"] = w_mape;
  j["co_mape"] = co_mape;
  j["mape_per_level"] = mape_per_level;
  j["w_mape_per_level"] = w_mape_per_level;
  j["excluded_mape"] = excluded_mape;
  j["excluded_co"] = excluded_co;
  return j.dump(2);
}

}  // namespace ccast
