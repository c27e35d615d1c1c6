#pragma once

#include <array>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "influence/core.hpp"

namespace influence {

enum class Gender : std::uint8_t { female, male };

std::string_view gender_name(Gender g);

/// Traits of one simulated survey respondent.
struct DemographicProfile {
  std::string country;
  Gender gender = Gender::female;
  int age = 0;                 // years, within the country row's [age_min, age_max]
  int education = 1;           // 1 = lower secondary or less, 2 = upper secondary, 3 = tertiary
  int political_interest = 1;  // 1 = not at all .. 4 = very interested
  int ideology = 5;            // 0 = left .. 10 = right
  bool operator==(const DemographicProfile&) const = default;
};

/// Three 1..7 agreement ratings; the deprivation score is their mean.
struct DeprivationTriple {
  std::array<int, 3> ratings{4, 4, 4};
  double score() const { return (ratings[0] + ratings[1] + ratings[2]) / 3.0; }
  bool all_equal() const { return ratings[0] == ratings[1] && ratings[1] == ratings[2]; }
  bool operator==(const DeprivationTriple&) const = default;
};

/// One row of the per-country trait table. Traits are sampled independently.
struct CountryRow {
  std::string country;
  double weight = 1.0;
  double p_female = 0.5;
  double age_mean = 45.0;
  double age_sd = 15.0;
  int age_min = 18;
  int age_max = 80;
  std::array<double, 3> education{1.0, 1.0, 1.0};        // category weights
  std::array<double, 4> political_interest{1.0, 1.0, 1.0, 1.0};
  double ideology_mean = 5.0;
  double ideology_sd = 2.0;
};

class CountryTable {
 public:
  explicit CountryTable(std::vector<CountryRow> rows);
  const std::vector<CountryRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<CountryRow> rows_;
};

class TableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// CSV with header
/// `country,weight,p_female,age_mean,age_sd,age_min,age_max,edu_low,edu_mid,edu_high,
///  interest_1,interest_2,interest_3,interest_4,ideology_mean,ideology_sd`.
/// Lines starting with '#' are comments.
CountryTable read_country_table(std::istream& in);
CountryTable load_country_table(const std::filesystem::path& path);

DemographicProfile sample_profile(const CountryTable& table, Rng& rng);

/// m ~ N(mu, sigma); each rating is round(m + e_i) clipped to 1..7 with
/// e_i ~ N(0, perturb_sd) independent.
DeprivationTriple sample_deprivation(double mu, double sigma, double perturb_sd, Rng& rng);

struct CalibrationOptions {
  std::size_t draws = 100'000;
  double tolerance = 0.005;
  std::size_t max_iterations = 60;
  std::uint64_t seed = 0x0DE9'2153;
};

struct CalibrationResult {
  double perturb_sd = 0.0;
  double achieved = 1.0;  // Monte Carlo P(all three equal) at perturb_sd
  std::size_t iterations = 0;
};

/// Bisection on perturb_sd so that P(r1 = r2 = r3) hits `target`.
/// Throws std::runtime_error if the tolerance is not met within max_iterations.
CalibrationResult calibrate_perturbation(double mu, double sigma, double target = 0.5,
                                         const CalibrationOptions& options = {});

/// Monte Carlo estimate of P(all three equal) using common random numbers.
double prob_all_equal(double mu, double sigma, double perturb_sd, std::size_t draws,
                      std::uint64_t seed);

/// Monte Carlo estimate of E[D]. Rounding and clipping shift it away from mu.
double mean_deprivation_score(double mu, double sigma, double perturb_sd, std::size_t draws,
                              std::uint64_t seed);

}  // namespace influence
