#pragma once

#include <array>
#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "influence/core.hpp"
#include "influence/prompt.hpp"
#include "influence/statement_bank.hpp"

namespace influence {

struct CompletionParams {
  double temperature = 1.0;
  std::size_t max_tokens = 256;
  std::string model_name = "davinci-002";
  /// Request nonce. Synthetic backends fold it into their sampling stream so a
  /// re-rolled participant gets fresh noise; the remote backend ignores it.
  std::uint64_t seed = 0;

  void check() const;
};

class BackendError : public std::runtime_error {
 public:
  enum class Kind { AuthMissing, RateLimited, TransportError, BudgetExceeded, BadResponse };
  BackendError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string_view backend_error_kind_name(BackendError::Kind k);

/// Uniform completion interface. Implementations must be safe to call from
/// several threads at once.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;

  /// Counts the query against the cap, then delegates to do_complete.
  std::string complete(const PromptText& prompt, const CompletionParams& params);

  void set_query_cap(std::optional<std::size_t> cap) { query_cap_ = cap; }
  std::size_t queries() const { return queries_.load(); }
  virtual std::string name() const = 0;

 protected:
  virtual std::string do_complete(const PromptText& prompt, const CompletionParams& params) = 0;

 private:
  std::optional<std::size_t> query_cap_;
  std::atomic<std::size_t> queries_{0};
};

// ---------------------------------------------------------------------------
// Synthetic illusory-truth participant

using EffectMask = std::array<std::array<bool, kNumAttributes>, kNumAttributes>;  // [exposure][test]

/// Mixed exposure on a truth test: test = truth and exposure != truth.
EffectMask default_effect_mask();
EffectMask no_effect_mask();

struct SyntheticIteConfig {
  std::map<std::string, std::array<double, kNumAttributes>> base_mean;  // statement id -> per attribute
  double noise_sd = 0.7;
  double effect_offset = 0.0;
  double effect_tilt = 0.0;
  EffectMask effect_applies = default_effect_mask();

  /// Base means drawn uniformly from [lo, hi] for every statement and attribute.
  static SyntheticIteConfig random_means(const StatementBank& bank, std::uint64_t seed, double lo = 1.5,
                                         double hi = 5.5);
  void check() const;
};

/// Exposure-free mean plus, when the mask applies, offset + tilt * (base - 3.5);
/// Gaussian noise scaled by temperature; rounded and clipped to 1..6.
int synth_ite_rate(std::string_view statement_id, Attribute test_attr,
                   std::optional<Attribute> exposure_attr, const SyntheticIteConfig& cfg, Rng& rng,
                   double temperature = 1.0);

double synth_ite_mean(std::string_view statement_id, Attribute test_attr,
                      std::optional<Attribute> exposure_attr, const SyntheticIteConfig& cfg);

/// Reads the prompt text like a participant would: the recap lines give the
/// exposure history and the statement list gives the items to rate.
class SyntheticIteBackend final : public CompletionBackend {
 public:
  SyntheticIteBackend(const StatementBank& bank, SyntheticIteConfig cfg, std::uint64_t seed);
  std::string name() const override { return "synthetic-ite"; }
  const SyntheticIteConfig& config() const { return cfg_; }

 protected:
  std::string do_complete(const PromptText& prompt, const CompletionParams& params) override;

 private:
  const StatementBank* bank_;
  SyntheticIteConfig cfg_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Synthetic framing-study participant

/// Full-model coefficients for one outcome (persuasion or mobilization).
struct PfnCoefficients {
  double intercept = 0.0;
  double e = 0.0;
  double i = 0.0;
  double ei = 0.0;
  double d = 0.0;
  double de = 0.0;
  double di = 0.0;
  double dei = 0.0;
  std::map<std::string, double> country;  // missing countries contribute 0

  double linear_predictor(const std::string& country_name, bool e_flag, bool i_flag, double dep) const;
};

struct SyntheticPfnConfig {
  PfnCoefficients persuasion;
  PfnCoefficients mobilization;
  double noise_sd = 0.8;
  void check() const;
};

/// Coefficients each reported in its own (nested) regression model:
///   e, i  from  C + E + I
///   ei    from  C + E + I + ExI
///   d     from  C + E + I + D
///   de, di from C + E + I + D + DxE + DxI
///   dei   from  the full model.
struct NestedModelTargets {
  double e = 0.0, i = 0.0, ei = 0.0, d = 0.0, de = 0.0, di = 0.0, dei = 0.0;
};

/// Full-model coefficients whose projections onto the nested models equal the
/// targets, for E, I independent fair coins and D independent with mean `mean_d`.
PfnCoefficients plant_nested_targets(const NestedModelTargets& targets, double mean_d, double intercept);

int synth_pfn_rate(const std::string& country, ArticleKind article, double deprivation, ProbeKind probe,
                   const SyntheticPfnConfig& cfg, Rng& rng, double temperature = 1.0);

class SyntheticPfnBackend final : public CompletionBackend {
 public:
  SyntheticPfnBackend(PfnContext ctx, SyntheticPfnConfig cfg, std::uint64_t seed);
  std::string name() const override { return "synthetic-pfn"; }

 protected:
  std::string do_complete(const PromptText& prompt, const CompletionParams& params) override;

 private:
  PfnContext ctx_;
  SyntheticPfnConfig cfg_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Remote OpenAI-compatible completions endpoint

struct RemoteOptions {
  std::string url = "https://api.openai.com/v1/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  int max_retries = 5;
  double initial_backoff_s = 1.0;
  double max_backoff_s = 30.0;
  double timeout_s = 60.0;
  std::function<void(double)> sleep;  // defaults to std::this_thread::sleep_for
};

/// Request body sent to the endpoint.
nlohmann::json completion_request_body(const PromptText& prompt, const CompletionParams& params);

class RemoteBackend final : public CompletionBackend {
 public:
  explicit RemoteBackend(RemoteOptions options);
  std::string name() const override { return "remote"; }

 protected:
  std::string do_complete(const PromptText& prompt, const CompletionParams& params) override;

 private:
  RemoteOptions options_;
  std::string scheme_host_port_;
  std::string path_;
};

}  // namespace influence
