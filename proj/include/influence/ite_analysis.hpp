#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "influence/core.hpp"
#include "influence/stats/bootstrap.hpp"
#include "influence/stats/descriptives.hpp"
#include "influence/stats/regression.hpp"

namespace influence {

/// Raw ratings of one illusory-truth participant, as persisted.
struct IteParticipant {
  std::uint32_t id = 0;
  std::uint32_t block = 0;
  std::uint32_t attempts = 1;
  std::vector<RatingRecord> exposure;
  std::vector<RatingRecord> test;
};

struct IteDataset {
  std::vector<std::string> statement_ids;  // bank order
  std::vector<IteParticipant> participants;
};

enum class Condition : std::uint8_t { fresh, same, mixed };

struct TestObservation {
  std::uint32_t participant;  // index into the dataset
  std::uint32_t statement;    // index into statement_ids
  Attribute test_attr;
  Condition condition;
  std::optional<Attribute> exposure_attr;
  double value;
};

struct ExposureObservation {
  std::uint32_t participant;
  std::uint32_t statement;
  Attribute attribute;
  double value;
};

/// Test ratings classified by exposure condition, derived from the records alone.
class IteTable {
 public:
  explicit IteTable(const IteDataset& data);

  std::size_t participants() const { return n_participants_; }
  std::size_t statements() const { return statement_ids_.size(); }
  const std::vector<std::string>& statement_ids() const { return statement_ids_; }
  const std::vector<TestObservation>& test() const { return test_; }
  const std::vector<ExposureObservation>& exposure() const { return exposure_; }

 private:
  std::size_t n_participants_ = 0;
  std::vector<std::string> statement_ids_;
  std::vector<TestObservation> test_;
  std::vector<ExposureObservation> exposure_;
};

/// Per-statement mean ratings without (r) and with (r_prime) previous exposure.
struct ExposurePair {
  std::string statement_id;
  double r = 0.0;
  double r_prime = 0.0;
  std::size_t n_fresh = 0;
  std::size_t n_exposed = 0;
};

/// Pairs for one test attribute; `exposed` is Condition::mixed (all three other
/// exposure attributes pooled) or Condition::same. Statements lacking either
/// side are omitted.
std::vector<ExposurePair> exposure_pairs(const IteTable& table, Attribute test_attr, Condition exposed);

stats::OffsetTilt<double> fit_offset_tilt(const std::vector<ExposurePair>& pairs);

struct OffsetTiltFit {
  double offset = 0.0;
  double tilt = 0.0;
  stats::BootstrapInterval ci_offset;
  stats::BootstrapInterval ci_tilt;
  std::size_t statements = 0;
};

struct ExposureEffects {
  std::array<OffsetTiltFit, kNumAttributes> mixed;  // indexed by test attribute
  std::array<OffsetTiltFit, kNumAttributes> same;
  std::size_t resamples_used = 0;
  std::size_t resamples_dropped = 0;
  double corrected_level = 0.0;
};

/// Offset/tilt fits for every test attribute under mixed and same exposure,
/// with a single two-way bootstrap over all 16 coefficients.
ExposureEffects analyze_exposure_effects(const IteTable& table, const stats::BootstrapOptions& options);

/// Number of coefficients significant at `alpha` after correction.
std::size_t count_significant(const ExposureEffects& effects, double alpha = 0.05);

struct StatementMean {
  std::string statement_id;
  stats::MeanCi ci;
};

/// Exposure-phase mean ratings per statement for one attribute (unexposed ratings).
std::vector<StatementMean> exposure_phase_means(const IteTable& table, Attribute attribute);

/// Per-statement r and r' with confidence intervals for one test attribute.
struct StatementExposureMeans {
  std::string statement_id;
  stats::MeanCi fresh;
  stats::MeanCi exposed;
};

std::vector<StatementExposureMeans> exposure_means_with_ci(const IteTable& table, Attribute test_attr,
                                                           Condition exposed);

}  // namespace influence
