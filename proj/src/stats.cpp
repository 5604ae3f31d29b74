#include "usnav/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "usnav/error.hpp"

namespace usnav::stats {

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double quantile(std::vector<double> xs, double p) {
  if (xs.empty()) throw Error(ErrorCode::kInvalidArgument, "quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "quantile p outside [0, 1]");
  const double h = p * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  std::nth_element(xs.begin(), xs.begin() + lo, xs.end());
  const double a = xs[lo];
  if (hi == lo) return a;
  // Smallest element of the upper partition is the next order statistic.
  const double b = *std::min_element(xs.begin() + lo + 1, xs.end());
  return a + (h - static_cast<double>(lo)) * (b - a);
}

double median(const std::vector<double>& xs) { return quantile(xs, 0.5); }

double iqr(const std::vector<double>& xs) {
  return quantile(xs, 0.75) - quantile(xs, 0.25);
}

}  // namespace usnav::stats
