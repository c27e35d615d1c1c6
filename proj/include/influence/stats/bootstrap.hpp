#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "influence/core.hpp"

namespace influence::stats {

struct BootstrapOptions {
  std::size_t n_resamples = 10'000;
  std::size_t bonferroni_n = 16;
  double level = 0.95;
  std::uint64_t seed = 1;
  double max_drop_fraction = 0.01;
  unsigned threads = 0;  // 0 = hardware concurrency

  /// 1 - (1 - level) / bonferroni_n.
  double corrected_level() const;
};

struct BootstrapInterval {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double p = 1.0;  // Bonferroni-corrected two-sided sign p-value
};

struct BootstrapResult {
  std::vector<BootstrapInterval> components;
  std::size_t used = 0;
  std::size_t dropped = 0;
  double corrected_level = 0.0;
};

/// A statistic of the participant x statement table, given multiplicities
/// (how many times each participant and statement was drawn). nullopt marks a
/// resample on which the statistic is undefined.
using TableStatistic =
    std::function<std::optional<Eigen::VectorXd>(std::span<const double> participant_weights,
                                                 std::span<const double> statement_weights)>;

/// Two-way bootstrap: each replicate draws participants with replacement and,
/// independently, statements with replacement, then recomputes the statistic on
/// the induced table. Replicate b uses its own seed, so results do not depend on
/// thread scheduling. The statistic must be safe to call concurrently.
BootstrapResult two_way_bootstrap(std::size_t n_participants, std::size_t n_statements,
                                  const TableStatistic& statistic, const BootstrapOptions& options = {});

/// Linear-interpolation quantile of sorted data.
double sorted_quantile(std::span<const double> sorted, double q);

/// Percentile interval and corrected sign p-value from replicate values.
BootstrapInterval summarize_replicates(double estimate, std::vector<double> replicates,
                                       const BootstrapOptions& options);

}  // namespace influence::stats
