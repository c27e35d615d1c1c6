#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "influence/core.hpp"
#include "influence/prompt.hpp"
#include "influence/sampler.hpp"
#include "influence/stats/descriptives.hpp"

namespace influence {

struct PfnParticipant {
  std::uint32_t id = 0;
  std::uint32_t attempts = 1;
  DemographicProfile profile;
  DeprivationTriple deprivation;
  ArticleKind article = ArticleKind::none;
  std::vector<RatingRecord> ratings;  // one per probe
};

struct PfnDataset {
  std::map<std::string, ProbeKind> probe_kinds;  // probe id -> kind
  std::vector<PfnParticipant> participants;
};

/// Per-participant regression inputs.
struct PfnScores {
  std::string country;
  bool e = false;
  bool i = false;
  double d = 0.0;
  double p = 0.0;  // mean persuasion rating
  double m = 0.0;  // mean mobilization rating
};

PfnScores score_participant(const PfnParticipant& participant, const std::map<std::string, ProbeKind>& kinds);
std::vector<PfnScores> score_dataset(const PfnDataset& data);

enum class Outcome : std::uint8_t { persuasion, mobilization };
std::string_view outcome_symbol(Outcome o);

/// Nested regression models. Country indicators are always included.
struct ModelSpec {
  bool ei = false;       // E x I
  bool d = false;        // D
  bool d_pair = false;   // D x E, D x I
  bool d_triple = false; // D x E x I
  std::string label(Outcome o) const;
  auto operator<=>(const ModelSpec&) const = default;
};

struct RegressionResult {
  std::string model;
  std::vector<std::string> names;  // "(intercept)", "E", "I", "ExI", "D", "DxE", "DxI", "DxExI", "C[<country>]"
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::VectorXd t;
  Eigen::VectorXd p;
  std::size_t n = 0;
  std::size_t n_clusters = 0;

  std::size_t index_of(std::string_view name) const;
  double coef(std::string_view name) const { return beta(static_cast<Eigen::Index>(index_of(name))); }
  double se_of(std::string_view name) const { return se(static_cast<Eigen::Index>(index_of(name))); }
  double p_of(std::string_view name) const { return p(static_cast<Eigen::Index>(index_of(name))); }
};

/// Fits one model with country-clustered CR1 standard errors. The last country
/// in sorted order is the reference level.
RegressionResult fit_pfn_model(const std::vector<PfnScores>& scores, Outcome outcome, const ModelSpec& model);

struct Table7Row {
  std::string hypothesis;  // empty for the two deprivation-only rows
  Outcome outcome;
  std::string regressor;
  ModelSpec model;
};

/// The fourteen rows, in reporting order.
const std::vector<Table7Row>& table7_rows();

struct Table7Entry {
  Table7Row row;
  double coef = 0.0;
  double se = 0.0;
  double t = 0.0;
  double p = 1.0;
};

struct Table7Battery {
  std::vector<RegressionResult> fits;  // one per distinct (outcome, model)
  std::vector<Table7Entry> entries;
};

Table7Battery run_table7_battery(const std::vector<PfnScores>& scores);

struct Table6 {
  stats::MeanSd persuasion;
  stats::MeanSd mobilization;
};

Table6 describe_scores(const std::vector<PfnScores>& scores);

}  // namespace influence
