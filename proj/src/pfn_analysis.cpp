#include "influence/pfn_analysis.hpp"

#include <algorithm>
#include <set>

#include "influence/stats/regression.hpp"

namespace influence {

PfnScores score_participant(const PfnParticipant& participant, const std::map<std::string, ProbeKind>& kinds) {
  double p_sum = 0.0, m_sum = 0.0;
  std::size_t p_n = 0, m_n = 0;
  for (const auto& r : participant.ratings) {
    auto it = kinds.find(r.item_id);
    if (it == kinds.end()) throw std::invalid_argument("rating for unknown probe " + r.item_id);
    if (it->second == ProbeKind::persuasion) {
      p_sum += r.value;
      ++p_n;
    } else {
      m_sum += r.value;
      ++m_n;
    }
  }
  if (p_n == 0 || m_n == 0)
    throw std::invalid_argument("participant " + std::to_string(participant.id) + " lacks persuasion or mobilization ratings");
  return {participant.profile.country,
          anti_elitist(participant.article),
          anti_immigrant(participant.article),
          participant.deprivation.score(),
          p_sum / static_cast<double>(p_n),
          m_sum / static_cast<double>(m_n)};
}

std::vector<PfnScores> score_dataset(const PfnDataset& data) {
  std::vector<PfnScores> out;
  out.reserve(data.participants.size());
  for (const auto& p : data.participants) out.push_back(score_participant(p, data.probe_kinds));
  return out;
}

std::string_view outcome_symbol(Outcome o) { return o == Outcome::persuasion ? "P" : "M"; }

std::string ModelSpec::label(Outcome o) const {
  std::string s = "C_i + (E + I";
  if (ei) s += " + ExI";
  s += ")";
  if (d) s += " + D";
  if (d_pair || d_triple) {
    s += " + (DxE + DxI";
    if (d_triple) s += " + DxExI";
    s += ")";
  }
  s += " -> ";
  s += outcome_symbol(o);
  return s;
}

std::size_t RegressionResult::index_of(std::string_view name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("regressor " + std::string(name) + " not in model " + model);
  return static_cast<std::size_t>(it - names.begin());
}

RegressionResult fit_pfn_model(const std::vector<PfnScores>& scores, Outcome outcome, const ModelSpec& model) {
  std::set<std::string> country_set;
  for (const auto& s : scores) country_set.insert(s.country);
  const std::vector<std::string> countries(country_set.begin(), country_set.end());

  RegressionResult res;
  res.model = model.label(outcome);
  res.names = {"(intercept)", "E", "I"};
  if (model.ei) res.names.push_back("ExI");
  if (model.d) res.names.push_back("D");
  if (model.d_pair || model.d_triple) {
    res.names.push_back("DxE");
    res.names.push_back("DxI");
  }
  if (model.d_triple) res.names.push_back("DxExI");
  const std::size_t fixed = res.names.size();
  for (std::size_t c = 0; c + 1 < countries.size(); ++c) res.names.push_back("C[" + countries[c] + "]");

  const auto n = static_cast<Eigen::Index>(scores.size());
  const auto k = static_cast<Eigen::Index>(res.names.size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, k);
  Eigen::VectorXd y(n);
  std::vector<std::string> clusters;
  clusters.reserve(scores.size());
  for (Eigen::Index row = 0; row < n; ++row) {
    const auto& s = scores[static_cast<std::size_t>(row)];
    const double e = s.e, i = s.i, d = s.d;
    Eigen::Index col = 0;
    X(row, col++) = 1.0;
    X(row, col++) = e;
    X(row, col++) = i;
    if (model.ei) X(row, col++) = e * i;
    if (model.d) X(row, col++) = d;
    if (model.d_pair || model.d_triple) {
      X(row, col++) = d * e;
      X(row, col++) = d * i;
    }
    if (model.d_triple) X(row, col++) = d * e * i;
    const auto pos = std::lower_bound(countries.begin(), countries.end(), s.country) - countries.begin();
    if (static_cast<std::size_t>(pos) + 1 < countries.size())
      X(row, static_cast<Eigen::Index>(fixed) + pos) = 1.0;
    y(row) = outcome == Outcome::persuasion ? s.p : s.m;
    clusters.push_back(s.country);
  }
  const auto fit = stats::ols_cluster_robust(X, y, clusters);
  res.beta = fit.beta;
  res.se = fit.se;
  res.t = fit.t;
  res.p = fit.p;
  res.n = static_cast<std::size_t>(fit.n);
  res.n_clusters = static_cast<std::size_t>(fit.clusters);
  return res;
}

const std::vector<Table7Row>& table7_rows() {
  static const std::vector<Table7Row> rows = [] {
    const ModelSpec ei_only{};
    const ModelSpec with_ei{true, false, false, false};
    const ModelSpec with_d{false, true, false, false};
    const ModelSpec with_pair{false, true, true, false};
    const ModelSpec full{true, true, true, true};
    const auto P = Outcome::persuasion, M = Outcome::mobilization;
    return std::vector<Table7Row>{
        {"H1a", P, "E", ei_only},    {"H1b", P, "I", ei_only},      {"H1c", P, "ExI", with_ei},
        {"H2a", M, "E", ei_only},    {"H2b", M, "I", ei_only},      {"H2c", M, "ExI", with_ei},
        {"", P, "D", with_d},        {"", M, "D", with_d},          {"H3a", P, "DxE", with_pair},
        {"H3b", P, "DxI", with_pair}, {"H3c", P, "DxExI", full},     {"H4a", M, "DxE", with_pair},
        {"H4b", M, "DxI", with_pair}, {"H4c", M, "DxExI", full},
    };
  }();
  return rows;
}

Table7Battery run_table7_battery(const std::vector<PfnScores>& scores) {
  Table7Battery battery;
  std::map<std::pair<Outcome, ModelSpec>, std::size_t> fitted;
  for (const auto& row : table7_rows()) {
    const auto key = std::pair{row.outcome, row.model};
    auto it = fitted.find(key);
    if (it == fitted.end()) {
      battery.fits.push_back(fit_pfn_model(scores, row.outcome, row.model));
      it = fitted.emplace(key, battery.fits.size() - 1).first;
    }
    const auto& fit = battery.fits[it->second];
    const auto j = static_cast<Eigen::Index>(fit.index_of(row.regressor));
    battery.entries.push_back({row, fit.beta(j), fit.se(j), fit.t(j), fit.p(j)});
  }
  return battery;
}

Table6 describe_scores(const std::vector<PfnScores>& scores) {
  std::vector<double> p, m;
  p.reserve(scores.size());
  m.reserve(scores.size());
  for (const auto& s : scores) {
    p.push_back(s.p);
    m.push_back(s.m);
  }
  return {stats::mean_sd(p), stats::mean_sd(m)};
}

}  // namespace influence
