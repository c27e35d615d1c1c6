#pragma once

#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "influence/backend.hpp"
#include "influence/design.hpp"
#include "influence/ite_analysis.hpp"
#include "influence/pfn_analysis.hpp"

namespace influence {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A run could not proceed: a participant kept failing to parse, or existing
/// output does not belong to this configuration.
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raw data that is malformed or incomplete for analysis.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BackendConfig {
  std::string kind = "synthetic";  // synthetic | remote
  std::string url = "https://api.openai.com/v1/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string model = "davinci-002";
  double temperature = 1.0;
  std::size_t max_tokens = 0;  // 0: the prompt builder's completion estimate
  unsigned concurrency = 4;
  std::optional<std::size_t> query_cap;
  int max_retries = 5;
  double timeout_s = 60.0;
};

struct SyntheticIteSettings {
  double noise_sd = 0.7;
  double offset = 0.0;
  double tilt = 0.0;
  std::string effect = "mixed-truth";  // mixed-truth | none
  double base_mean_lo = 1.5;
  double base_mean_hi = 5.5;
  std::optional<std::uint64_t> seed;  // backend seed; derived from the run seed when unset
};

struct IteConfig {
  std::string bank = "statements.txt";
  std::string templates = "templates";
  std::size_t blocks = 10;
  std::uint64_t seed = 1;
  std::size_t max_attempts = 20;
  std::size_t token_budget = 4000;
  BackendConfig backend;
  SyntheticIteSettings synthetic;
};

/// Coefficients for one outcome. With `nested` planting they are the values
/// each nested model should report; otherwise they enter the generator as is.
struct PfnOutcomeSettings {
  double intercept = 4.0;
  NestedModelTargets coefficients;
  std::map<std::string, double> country_effects;
};

struct SyntheticPfnSettings {
  double noise_sd = 0.8;
  bool nested = true;
  PfnOutcomeSettings persuasion;
  PfnOutcomeSettings mobilization;
  std::optional<std::uint64_t> seed;
};

struct PfnConfig {
  std::string countries = "countries.csv";
  std::string articles = "articles";
  std::string probes = "probes.txt";
  std::string deprivation = "deprivation.txt";
  std::string templates = "templates";
  std::size_t participants = 2153;
  std::uint64_t seed = 1;
  std::size_t max_attempts = 20;
  double deprivation_mean = 4.30;
  double deprivation_sd = 1.61;
  double equal_target = 0.5;
  std::optional<double> perturb_sd;  // calibrated to equal_target when unset
  BackendConfig backend;
  SyntheticPfnSettings synthetic;
};

/// Strict readers: every key is optional, unknown keys are errors.
IteConfig ite_config_from_json(const nlohmann::json& j);
PfnConfig pfn_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const IteConfig& c);
nlohmann::json to_json(const PfnConfig& c);

/// Reads a config file; the "study" key selects the type.
nlohmann::json load_config_json(const std::filesystem::path& path);

struct RunOptions {
  std::filesystem::path data_dir;  // base for relative input paths
  std::filesystem::path out_dir;
  bool resume = false;
  std::optional<std::size_t> stop_after;  // process at most this many new participants
  std::function<void(const std::string&)> log;
};

struct RunSummary {
  std::size_t participants = 0;  // complete participants in the data file
  std::size_t resumed_from = 0;
  std::size_t attempts = 0;      // over the participants run in this call
  std::size_t queries = 0;
  std::filesystem::path data;
  std::filesystem::path manifest;
};

/// The backend is built from the config unless one is supplied.
RunSummary run_ite(const IteConfig& config, const RunOptions& options,
                   std::shared_ptr<CompletionBackend> backend = nullptr);
RunSummary run_pfn(const PfnConfig& config, const RunOptions& options,
                   std::shared_ptr<CompletionBackend> backend = nullptr);

/// Rebuilds the config stored in out_dir/manifest.json and continues the run.
RunSummary resume_run(const std::filesystem::path& out_dir, const RunOptions& options);

/// Backends as the runs construct them.
std::shared_ptr<CompletionBackend> make_ite_backend(const IteConfig& config, const StatementBank& bank);
std::shared_ptr<CompletionBackend> make_pfn_backend(const PfnConfig& config, const PfnContext& ctx,
                                                    double mean_deprivation);

/// Synthetic generator coefficients implied by the settings.
SyntheticPfnConfig synthetic_pfn_config(const SyntheticPfnSettings& s, double mean_deprivation);

struct StudyHeader {
  std::string study;  // ite | pfn
  nlohmann::json json;
};

StudyHeader read_header(std::istream& in);
IteDataset read_ite_dataset(std::istream& in);
PfnDataset read_pfn_dataset(std::istream& in);
std::string detect_study(const std::filesystem::path& data_file);

nlohmann::json to_json(const RatingRecord& r);
RatingRecord rating_from_json(const nlohmann::json& j);

}  // namespace influence
