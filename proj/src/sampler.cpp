#include "influence/sampler.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "text_util.hpp"

namespace influence {

std::string_view gender_name(Gender g) { return g == Gender::female ? "Female" : "Male"; }

CountryTable::CountryTable(std::vector<CountryRow> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) throw TableError("country table is empty");
  std::set<std::string> names;
  double total = 0.0;
  for (const auto& r : rows_) {
    if (r.country.empty()) throw TableError("country name is empty");
    if (!names.insert(r.country).second) throw TableError("duplicate country " + r.country);
    if (!(r.weight >= 0.0)) throw TableError(r.country + ": negative weight");
    if (!(r.p_female >= 0.0 && r.p_female <= 1.0)) throw TableError(r.country + ": p_female outside [0,1]");
    if (!(r.age_sd >= 0.0) || !(r.ideology_sd >= 0.0)) throw TableError(r.country + ": negative sd");
    if (r.age_min > r.age_max) throw TableError(r.country + ": age_min > age_max");
    double edu = 0.0, interest = 0.0;
    for (double w : r.education) {
      if (!(w >= 0.0)) throw TableError(r.country + ": negative education weight");
      edu += w;
    }
    for (double w : r.political_interest) {
      if (!(w >= 0.0)) throw TableError(r.country + ": negative interest weight");
      interest += w;
    }
    if (edu <= 0.0 || interest <= 0.0) throw TableError(r.country + ": categorical weights sum to zero");
    total += r.weight;
  }
  if (total <= 0.0) throw TableError("country weights sum to zero");
}

namespace {

constexpr std::array<std::string_view, 16> kColumns = {
    "country",    "weight",     "p_female",   "age_mean",   "age_sd",        "age_min",
    "age_max",    "edu_low",    "edu_mid",    "edu_high",   "interest_1",    "interest_2",
    "interest_3", "interest_4", "ideology_mean", "ideology_sd"};

double parse_number(std::string_view s, std::size_t line_no) {
  const std::string str(txt::trim(s));
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(str, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != str.size() || !std::isfinite(v))
    throw TableError("line " + std::to_string(line_no) + ": bad number '" + str + "'");
  return v;
}

double normal_or_point(double mean, double sd, Rng& rng) {
  if (sd <= 0.0) return mean;
  return std::normal_distribution<double>(mean, sd)(rng);
}

}  // namespace

CountryTable read_country_table(std::istream& in) {
  std::vector<CountryRow> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = txt::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto fields = txt::split(trimmed, ',');
    if (fields.size() != kColumns.size())
      throw TableError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(kColumns.size()) + " columns, got " +
                       std::to_string(fields.size()));
    if (!header_seen) {
      for (std::size_t i = 0; i < kColumns.size(); ++i)
        if (txt::trim(fields[i]) != kColumns[i])
          throw TableError("line " + std::to_string(line_no) + ": expected column '" +
                           std::string(kColumns[i]) + "'");
      header_seen = true;
      continue;
    }
    CountryRow r;
    r.country = std::string(txt::trim(fields[0]));
    std::array<double, 15> v{};
    for (std::size_t i = 1; i < fields.size(); ++i) v[i - 1] = parse_number(fields[i], line_no);
    r.weight = v[0];
    r.p_female = v[1];
    r.age_mean = v[2];
    r.age_sd = v[3];
    r.age_min = static_cast<int>(v[4]);
    r.age_max = static_cast<int>(v[5]);
    r.education = {v[6], v[7], v[8]};
    r.political_interest = {v[9], v[10], v[11], v[12]};
    r.ideology_mean = v[13];
    r.ideology_sd = v[14];
    rows.push_back(std::move(r));
  }
  if (!header_seen) throw TableError("country table has no header");
  return CountryTable(std::move(rows));
}

CountryTable load_country_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TableError("cannot open " + path.string());
  return read_country_table(in);
}

DemographicProfile sample_profile(const CountryTable& table, Rng& rng) {
  std::vector<double> weights;
  weights.reserve(table.size());
  for (const auto& r : table.rows()) weights.push_back(r.weight);
  const auto& row = table.rows()[std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng)];

  DemographicProfile p;
  p.country = row.country;
  p.gender = std::bernoulli_distribution(row.p_female)(rng) ? Gender::female : Gender::male;
  p.age = round_clip(normal_or_point(row.age_mean, row.age_sd, rng), {row.age_min, row.age_max});
  p.education = 1 + static_cast<int>(std::discrete_distribution<int>(row.education.begin(),
                                                                      row.education.end())(rng));
  p.political_interest =
      1 + static_cast<int>(std::discrete_distribution<int>(row.political_interest.begin(),
                                                           row.political_interest.end())(rng));
  p.ideology = round_clip(normal_or_point(row.ideology_mean, row.ideology_sd, rng), {0, 10});
  return p;
}

DeprivationTriple sample_deprivation(double mu, double sigma, double perturb_sd, Rng& rng) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sample_deprivation: sigma must be > 0");
  if (!(perturb_sd >= 0.0)) throw std::invalid_argument("sample_deprivation: perturb_sd must be >= 0");
  const double m = std::normal_distribution<double>(mu, sigma)(rng);
  DeprivationTriple t;
  std::normal_distribution<double> eps(0.0, 1.0);
  for (auto& r : t.ratings) r = round_clip(m + perturb_sd * eps(rng), kAgreementScale);
  return t;
}

namespace {

struct CommonDraws {
  std::vector<double> m;
  std::vector<std::array<double, 3>> z;
};

CommonDraws common_draws(double mu, double sigma, std::size_t draws, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> base(mu, sigma), eps(0.0, 1.0);
  CommonDraws d;
  d.m.resize(draws);
  d.z.resize(draws);
  for (std::size_t i = 0; i < draws; ++i) {
    d.m[i] = base(rng);
    for (auto& e : d.z[i]) e = eps(rng);
  }
  return d;
}

double all_equal_fraction(const CommonDraws& d, double perturb_sd) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < d.m.size(); ++i) {
    const int a = round_clip(d.m[i] + perturb_sd * d.z[i][0], kAgreementScale);
    const int b = round_clip(d.m[i] + perturb_sd * d.z[i][1], kAgreementScale);
    const int c = round_clip(d.m[i] + perturb_sd * d.z[i][2], kAgreementScale);
    hits += (a == b && b == c);
  }
  return static_cast<double>(hits) / static_cast<double>(d.m.size());
}

}  // namespace

double prob_all_equal(double mu, double sigma, double perturb_sd, std::size_t draws,
                      std::uint64_t seed) {
  return all_equal_fraction(common_draws(mu, sigma, draws, seed), perturb_sd);
}

double mean_deprivation_score(double mu, double sigma, double perturb_sd, std::size_t draws,
                              std::uint64_t seed) {
  const auto d = common_draws(mu, sigma, draws, seed);
  double sum = 0.0;
  for (std::size_t i = 0; i < d.m.size(); ++i)
    for (double z : d.z[i]) sum += round_clip(d.m[i] + perturb_sd * z, kAgreementScale);
  return sum / (3.0 * static_cast<double>(d.m.size()));
}

CalibrationResult calibrate_perturbation(double mu, double sigma, double target,
                                         const CalibrationOptions& options) {
  if (!(target > 0.0 && target <= 1.0))
    throw std::invalid_argument("calibrate_perturbation: target must be in (0, 1]");
  if (!(sigma > 0.0)) throw std::invalid_argument("calibrate_perturbation: sigma must be > 0");
  if (target >= 1.0) return {0.0, 1.0, 0};

  const auto draws = common_draws(mu, sigma, options.draws, options.seed);
  double lo = 0.0;
  double hi = 1.0;
  std::size_t it = 0;
  double p_hi = all_equal_fraction(draws, hi);
  while (p_hi > target) {
    lo = hi;
    hi *= 2.0;
    p_hi = all_equal_fraction(draws, hi);
    if (++it > options.max_iterations || hi > 1e3)
      throw std::runtime_error("calibrate_perturbation: target unreachable");
  }
  for (; it < options.max_iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double p = all_equal_fraction(draws, mid);
    if (std::abs(p - target) < options.tolerance) return {mid, p, it + 1};
    (p > target ? lo : hi) = mid;
  }
  throw std::runtime_error("calibrate_perturbation: no convergence within " +
                           std::to_string(options.max_iterations) + " iterations");
}

}  // namespace influence
