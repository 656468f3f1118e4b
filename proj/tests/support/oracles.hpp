#pragma once

// Straightforward reference implementations of the scoring metrics, written
// index-by-index without sharing code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace metaems::testing::oracle {

inline double Ramping(const std::vector<double>& e) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < e.size(); ++i) s += std::fabs(e[i + 1] - e[i]);
  return s;
}

inline double OneMinusLoadFactor(const std::vector<double>& e) {
  const std::size_t months = e.size() / 720;
  double acc = 0.0;
  for (std::size_t m = 0; m < months; ++m) {
    double peak = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t h = 0; h < 720; ++h) {
      const double v = e[m * 720 + h];
      sum += v;
      if (v > peak) peak = v;
    }
    if (peak > 0.0) acc += 1.0 - sum / 720.0 / peak;
  }
  return acc / static_cast<double>(months);
}

inline double AvgDailyPeak(const std::vector<double>& e) {
  const std::size_t days = e.size() / 24;
  double acc = 0.0;
  for (std::size_t d = 0; d < days; ++d) {
    double peak = e[d * 24];
    for (std::size_t h = 1; h < 24; ++h) peak = std::max(peak, e[d * 24 + h]);
    acc += peak;
  }
  return acc / static_cast<double>(days);
}

inline double AnnualPeak(const std::vector<double>& e) {
  double peak = e[0];
  for (double v : e) peak = v > peak ? v : peak;
  return peak;
}

inline double NetConsumption(const std::vector<double>& e) {
  double s = 0.0;
  for (double v : e) s += v > 0.0 ? v : 0.0;
  return s;
}

inline double Cost(const std::vector<double>& e, const std::vector<double>& price) {
  double s = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) s += e[i] > 0.0 ? price[i] * e[i] : 0.0;
  return s;
}

inline double AverageCostPercent(const std::vector<std::vector<double>>& e,
                                 const std::vector<std::vector<double>>& price,
                                 const std::vector<std::vector<double>>& rbc) {
  double s = 0.0;
  for (std::size_t b = 0; b < e.size(); ++b) s += Cost(e[b], price[b]) / Cost(rbc[b], price[b]) * 100.0;
  return s / static_cast<double>(e.size());
}

}  // namespace metaems::testing::oracle
