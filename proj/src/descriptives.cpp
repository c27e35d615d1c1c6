#include "influence/stats/descriptives.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "influence/stats/regression.hpp"

namespace influence::stats {

namespace {
double normal_quantile(double level) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + level / 2.0);
}
}  // namespace

MeanSd mean_sd(std::span<const double> values) {
  if (values.empty()) throw StatsError(StatsError::Kind::InsufficientData, "mean of empty sample");
  MeanSd out;
  out.n = values.size();
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(out.n);
  if (out.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(out.n - 1));
  }
  return out;
}

MeanCi mean_ci(std::span<const double> values, double level) {
  const auto ms = mean_sd(values);
  const double half = normal_quantile(level) * ms.sd / std::sqrt(static_cast<double>(ms.n));
  return {ms.mean, ms.mean - half, ms.mean + half, ms.n};
}

Correlation pearson_ci(std::span<const double> x, std::span<const double> y, double level) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson_ci: length mismatch");
  if (x.size() < 4) throw StatsError(StatsError::Kind::InsufficientData, "pearson_ci needs >= 4 points");
  const auto mx = mean_sd(x), my = mean_sd(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx.mean) * (y[i] - my.mean);
    sxx += (x[i] - mx.mean) * (x[i] - mx.mean);
    syy += (y[i] - my.mean) * (y[i] - my.mean);
  }
  if (sxx <= 0.0 || syy <= 0.0) throw StatsError(StatsError::Kind::DegenerateDesign, "pearson_ci: zero variance");
  Correlation c;
  c.n = x.size();
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double z = std::atanh(c.r);
  const double half = normal_quantile(level) / std::sqrt(static_cast<double>(c.n - 3));
  c.lo = std::tanh(z - half);
  c.hi = std::tanh(z + half);
  return c;
}

}  // namespace influence::stats
