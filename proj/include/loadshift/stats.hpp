#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace loadshift {

struct SeriesSummary {
  double min = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  double stdev = 0.0;  // population; 0 for a single sample
  std::size_t count = 0;
};

// Empty input yields an all-zero summary with count 0.
SeriesSummary summarize(std::span<const double> values);

// Linear interpolation between closest ranks (R type 7). q in [0, 1].
double quantile(std::vector<double> values, double q);

// Rank correlation with average ranks for ties. NaN when either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace loadshift
