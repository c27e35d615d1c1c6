#include "influence/ite_analysis.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

namespace influence {

IteTable::IteTable(const IteDataset& data) : n_participants_(data.participants.size()) {
  statement_ids_ = data.statement_ids;
  if (statement_ids_.empty()) {
    std::set<std::string> ids;
    for (const auto& p : data.participants) {
      for (const auto& r : p.exposure) ids.insert(r.item_id);
      for (const auto& r : p.test) ids.insert(r.item_id);
    }
    statement_ids_.assign(ids.begin(), ids.end());
  }
  std::unordered_map<std::string, std::uint32_t> index_of;
  for (std::uint32_t i = 0; i < statement_ids_.size(); ++i) index_of.emplace(statement_ids_[i], i);
  auto lookup = [&](const std::string& id) {
    auto it = index_of.find(id);
    if (it == index_of.end()) throw std::invalid_argument("rating for unknown statement " + id);
    return it->second;
  };

  for (std::uint32_t pi = 0; pi < data.participants.size(); ++pi) {
    const auto& p = data.participants[pi];
    std::unordered_map<std::string, Attribute> exposed;
    for (const auto& r : p.exposure) {
      if (!r.attribute) throw std::invalid_argument("exposure record without attribute");
      exposed.emplace(r.item_id, *r.attribute);
      exposure_.push_back({pi, lookup(r.item_id), *r.attribute, static_cast<double>(r.value)});
    }
    for (const auto& r : p.test) {
      if (!r.attribute) throw std::invalid_argument("test record without attribute");
      TestObservation obs{pi, lookup(r.item_id), *r.attribute, Condition::fresh, std::nullopt,
                          static_cast<double>(r.value)};
      if (auto it = exposed.find(r.item_id); it != exposed.end()) {
        obs.exposure_attr = it->second;
        obs.condition = it->second == *r.attribute ? Condition::same : Condition::mixed;
      }
      test_.push_back(obs);
    }
  }
}

namespace {

/// Weighted per-statement sums for one test attribute.
struct Accumulator {
  std::vector<double> fresh_sum, fresh_w, exposed_sum, exposed_w;
  explicit Accumulator(std::size_t n) : fresh_sum(n), fresh_w(n), exposed_sum(n), exposed_w(n) {}
};

std::optional<stats::OffsetTilt<double>> fit_accumulated(const Accumulator& acc,
                                                         std::span<const double> statement_weights) {
  const auto n = static_cast<Eigen::Index>(acc.fresh_sum.size());
  Eigen::VectorXd r(n), rp(n), w(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto k = static_cast<std::size_t>(s);
    const bool usable = acc.fresh_w[k] > 0 && acc.exposed_w[k] > 0;
    r(s) = usable ? acc.fresh_sum[k] / acc.fresh_w[k] : 0.0;
    rp(s) = usable ? acc.exposed_sum[k] / acc.exposed_w[k] : 0.0;
    w(s) = usable ? statement_weights[k] : 0.0;
  }
  try {
    return stats::fit_offset_tilt(r, rp, w);
  } catch (const stats::StatsError&) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<ExposurePair> exposure_pairs(const IteTable& table, Attribute test_attr, Condition exposed) {
  if (exposed == Condition::fresh) throw std::invalid_argument("exposure_pairs: exposed condition must be mixed or same");
  const std::size_t n = table.statements();
  std::vector<double> fs(n), es(n);
  std::vector<std::size_t> fn(n), en(n);
  for (const auto& o : table.test()) {
    if (o.test_attr != test_attr) continue;
    if (o.condition == Condition::fresh) {
      fs[o.statement] += o.value;
      ++fn[o.statement];
    } else if (o.condition == exposed) {
      es[o.statement] += o.value;
      ++en[o.statement];
    }
  }
  std::vector<ExposurePair> out;
  for (std::size_t s = 0; s < n; ++s)
    if (fn[s] && en[s])
      out.push_back({table.statement_ids()[s], fs[s] / static_cast<double>(fn[s]),
                     es[s] / static_cast<double>(en[s]), fn[s], en[s]});
  return out;
}

stats::OffsetTilt<double> fit_offset_tilt(const std::vector<ExposurePair>& pairs) {
  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::VectorXd r(n), rp(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    r(k) = pairs[static_cast<std::size_t>(k)].r;
    rp(k) = pairs[static_cast<std::size_t>(k)].r_prime;
  }
  return stats::fit_offset_tilt(r, rp);
}

ExposureEffects analyze_exposure_effects(const IteTable& table, const stats::BootstrapOptions& options) {
  std::array<std::vector<TestObservation>, kNumAttributes> by_attr;
  for (const auto& o : table.test()) by_attr[index(o.test_attr)].push_back(o);
  const std::size_t n_statements = table.statements();

  // Layout: [mixed offset, mixed tilt] per attribute, then the same for same exposure.
  const stats::TableStatistic statistic =
      [&](std::span<const double> wp, std::span<const double> ws) -> std::optional<Eigen::VectorXd> {
    Eigen::VectorXd out(4 * static_cast<Eigen::Index>(kNumAttributes));
    for (std::size_t a = 0; a < kNumAttributes; ++a) {
      Accumulator mixed(n_statements), same(n_statements);
      for (const auto& o : by_attr[a]) {
        const double w = wp[o.participant];
        if (w == 0.0) continue;
        const double wv = w * o.value;
        if (o.condition == Condition::fresh) {
          mixed.fresh_sum[o.statement] += wv;
          mixed.fresh_w[o.statement] += w;
        } else {
          auto& acc = o.condition == Condition::mixed ? mixed : same;
          acc.exposed_sum[o.statement] += wv;
          acc.exposed_w[o.statement] += w;
        }
      }
      same.fresh_sum = mixed.fresh_sum;
      same.fresh_w = mixed.fresh_w;
      const auto fm = fit_accumulated(mixed, ws);
      const auto fs = fit_accumulated(same, ws);
      if (!fm || !fs) return std::nullopt;
      const auto i = static_cast<Eigen::Index>(2 * a);
      out(i) = fm->offset;
      out(i + 1) = fm->tilt;
      out(i + 2 * static_cast<Eigen::Index>(kNumAttributes)) = fs->offset;
      out(i + 1 + 2 * static_cast<Eigen::Index>(kNumAttributes)) = fs->tilt;
    }
    return out;
  };

  const auto boot = stats::two_way_bootstrap(table.participants(), n_statements, statistic, options);
  ExposureEffects fx;
  fx.resamples_used = boot.used;
  fx.resamples_dropped = boot.dropped;
  fx.corrected_level = boot.corrected_level;
  for (std::size_t a = 0; a < kNumAttributes; ++a) {
    const Attribute attr = kAttributes[a];
    auto fill = [&](OffsetTiltFit& f, std::size_t base, Condition c) {
      f.ci_offset = boot.components[base + 2 * a];
      f.ci_tilt = boot.components[base + 2 * a + 1];
      f.offset = f.ci_offset.estimate;
      f.tilt = f.ci_tilt.estimate;
      f.statements = exposure_pairs(table, attr, c).size();
    };
    fill(fx.mixed[a], 0, Condition::mixed);
    fill(fx.same[a], 2 * kNumAttributes, Condition::same);
  }
  return fx;
}

std::size_t count_significant(const ExposureEffects& effects, double alpha) {
  std::size_t n = 0;
  for (const auto* table : {&effects.mixed, &effects.same})
    for (const auto& f : *table) n += (f.ci_offset.p < alpha) + (f.ci_tilt.p < alpha);
  return n;
}

std::vector<StatementMean> exposure_phase_means(const IteTable& table, Attribute attribute) {
  std::vector<std::vector<double>> values(table.statements());
  for (const auto& o : table.exposure())
    if (o.attribute == attribute) values[o.statement].push_back(o.value);
  std::vector<StatementMean> out;
  for (std::size_t s = 0; s < values.size(); ++s)
    if (!values[s].empty()) out.push_back({table.statement_ids()[s], stats::mean_ci(values[s])});
  return out;
}

std::vector<StatementExposureMeans> exposure_means_with_ci(const IteTable& table, Attribute test_attr,
                                                           Condition exposed) {
  std::vector<std::vector<double>> fresh(table.statements()), expo(table.statements());
  for (const auto& o : table.test()) {
    if (o.test_attr != test_attr) continue;
    if (o.condition == Condition::fresh) fresh[o.statement].push_back(o.value);
    else if (o.condition == exposed) expo[o.statement].push_back(o.value);
  }
  std::vector<StatementExposureMeans> out;
  for (std::size_t s = 0; s < fresh.size(); ++s)
    if (!fresh[s].empty() && !expo[s].empty())
      out.push_back({table.statement_ids()[s], stats::mean_ci(fresh[s]), stats::mean_ci(expo[s])});
  return out;
}

}  // namespace influence
