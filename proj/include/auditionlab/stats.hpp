#pragma once

#include "auditionlab/random.hpp"

#include <span>
#include <vector>

namespace auditionlab {

double mean(std::span<const double> xs);
double median(std::span<const double> xs);
/// Sample standard deviation (n - 1).
double stddev(std::span<const double> xs);

struct Interval {
  double low = 0.0;
  double high = 0.0;

  bool overlaps(const Interval& other) const { return low <= other.high && other.low <= high; }
};

/// mean +/- 1.96 sd / sqrt(n).
Interval normal_ci95(std::span<const double> xs);

/// Percentile bootstrap 95% interval of the median.
Interval bootstrap_median_ci95(std::span<const double> xs, int resamples, RandomStream& rng);

}  // namespace auditionlab
