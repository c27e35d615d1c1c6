#pragma once

#include <span>

namespace influence::stats {

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample sd (n - 1); 0 for a single value
  std::size_t n = 0;
};

MeanSd mean_sd(std::span<const double> values);

/// Normal-approximation interval mean +/- z * sd / sqrt(n).
struct MeanCi {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;
};

MeanCi mean_ci(std::span<const double> values, double level = 0.95);

struct Correlation {
  double r = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n = 0;
};

/// Pearson correlation with a Fisher z-transform confidence interval.
Correlation pearson_ci(std::span<const double> x, std::span<const double> y, double level = 0.95);

}  // namespace influence::stats
