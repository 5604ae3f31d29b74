#pragma once

#include <vector>

namespace usnav::stats {

double mean(const std::vector<double>& xs);
// Sample standard deviation (n - 1); 0 for fewer than two samples.
double stddev(const std::vector<double>& xs);
// Linear interpolation between order statistics (R type 7). p in [0, 1].
double quantile(std::vector<double> xs, double p);
double median(const std::vector<double>& xs);
double iqr(const std::vector<double>& xs);

}  // namespace usnav::stats
