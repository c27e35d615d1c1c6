#include "influence/stats/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "influence/stats/regression.hpp"

namespace influence::stats {

double BootstrapOptions::corrected_level() const {
  return 1.0 - (1.0 - level) / static_cast<double>(bonferroni_n);
}

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw StatsError(StatsError::Kind::InsufficientData, "quantile of empty sample");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BootstrapInterval summarize_replicates(double estimate, std::vector<double> replicates,
                                       const BootstrapOptions& options) {
  std::sort(replicates.begin(), replicates.end());
  const double tail = (1.0 - options.corrected_level()) / 2.0;
  BootstrapInterval out;
  out.estimate = estimate;
  out.lo = sorted_quantile(replicates, tail);
  out.hi = sorted_quantile(replicates, 1.0 - tail);
  const double n = static_cast<double>(replicates.size());
  const auto below = std::upper_bound(replicates.begin(), replicates.end(), 0.0) - replicates.begin();
  const auto above = replicates.end() - std::lower_bound(replicates.begin(), replicates.end(), 0.0);
  const double sign_fraction = std::min(static_cast<double>(below), static_cast<double>(above)) / n;
  out.p = std::min(1.0, static_cast<double>(options.bonferroni_n) * 2.0 * sign_fraction);
  return out;
}

namespace {

void draw_multiplicities(std::vector<double>& w, Rng& rng) {
  std::fill(w.begin(), w.end(), 0.0);
  std::uniform_int_distribution<std::size_t> pick(0, w.size() - 1);
  for (std::size_t i = 0; i < w.size(); ++i) w[pick(rng)] += 1.0;
}

}  // namespace

BootstrapResult two_way_bootstrap(std::size_t n_participants, std::size_t n_statements,
                                  const TableStatistic& statistic, const BootstrapOptions& options) {
  if (n_participants < 2 || n_statements < 2)
    throw StatsError(StatsError::Kind::InsufficientData, "bootstrap needs >= 2 participants and >= 2 statements");
  if (options.n_resamples == 0 || options.bonferroni_n == 0)
    throw std::invalid_argument("bootstrap: n_resamples and bonferroni_n must be positive");

  const std::vector<double> ones_p(n_participants, 1.0), ones_s(n_statements, 1.0);
  const auto estimate = statistic(ones_p, ones_s);
  if (!estimate) throw StatsError(StatsError::Kind::DegenerateDesign, "statistic undefined on the full data");
  const Eigen::Index dim = estimate->size();

  const std::size_t B = options.n_resamples;
  Eigen::MatrixXd values(dim, static_cast<Eigen::Index>(B));
  std::vector<char> ok(B, 0);

  auto worker = [&](std::size_t begin, std::size_t end) {
    std::vector<double> wp(n_participants), ws(n_statements);
    for (std::size_t b = begin; b < end; ++b) {
      Rng rng(derive_seed(options.seed, b));
      draw_multiplicities(wp, rng);
      draw_multiplicities(ws, rng);
      if (auto v = statistic(wp, ws); v && v->size() == dim && v->allFinite()) {
        values.col(static_cast<Eigen::Index>(b)) = *v;
        ok[b] = 1;
      }
    }
  };
  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, B));
  if (threads <= 1) {
    worker(0, B);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (B + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back(worker, std::min(B, t * chunk), std::min(B, (t + 1) * chunk));
    for (auto& th : pool) th.join();
  }

  BootstrapResult result;
  result.corrected_level = options.corrected_level();
  result.used = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 1));
  result.dropped = B - result.used;
  if (static_cast<double>(result.dropped) > options.max_drop_fraction * static_cast<double>(B))
    throw StatsError(StatsError::Kind::TooManyDropped,
                     "statistic undefined on " + std::to_string(result.dropped) + " of " + std::to_string(B) +
                         " resamples");
  for (Eigen::Index j = 0; j < dim; ++j) {
    std::vector<double> reps;
    reps.reserve(result.used);
    for (std::size_t b = 0; b < B; ++b)
      if (ok[b]) reps.push_back(values(j, static_cast<Eigen::Index>(b)));
    result.components.push_back(summarize_replicates((*estimate)(j), std::move(reps), options));
  }
  return result;
}

}  // namespace influence::stats
