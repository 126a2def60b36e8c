#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fracid/errors.hpp"

namespace fracid::detail {

// Hyndman-Fan type 7 quantile on a sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) {
    throw EmptyEnsembleError("quantile of an empty sample");
  }
  if (sorted.size() == 1) return sorted.front();
  const double h = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Unbiased sample variance (n-1 denominator); zero for singletons.
inline double sample_variance(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double sq = 0.0;
  for (double v : x) {
    const double d = v - m;
    sq += d * d;
  }
  return sq / static_cast<double>(x.size() - 1);
}

// Destructive median (reorders its argument).
inline double median_inplace(std::vector<double>& x) {
  if (x.empty()) {
    throw EstimationError("median of an empty sample");
  }
  const std::size_t mid = x.size() / 2;
  std::nth_element(x.begin(), x.begin() + mid, x.end());
  double hi = x[mid];
  if (x.size() % 2 == 1) return hi;
  std::nth_element(x.begin(), x.begin() + mid - 1, x.begin() + mid);
  return 0.5 * (x[mid - 1] + hi);
}

// Least-squares slope of y against x.
inline double regression_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw EstimationError("regression needs two samples of equal length >= 2");
  }
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) {
    throw EstimationError("regression abscissae are all equal");
  }
  return sxy / sxx;
}

}  // namespace fracid::detail
