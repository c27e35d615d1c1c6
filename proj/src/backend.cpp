#include "influence/backend.hpp"

#include <cmath>
#include <random>

#include "text_util.hpp"

namespace influence {

void CompletionParams::check() const {
  if (!(temperature >= 0.0 && temperature <= 2.0))
    throw std::invalid_argument("temperature must be in [0, 2]");
  if (max_tokens == 0) throw std::invalid_argument("max_tokens must be positive");
}

std::string_view backend_error_kind_name(BackendError::Kind k) {
  switch (k) {
    case BackendError::Kind::AuthMissing: return "AuthMissing";
    case BackendError::Kind::RateLimited: return "RateLimited";
    case BackendError::Kind::TransportError: return "TransportError";
    case BackendError::Kind::BudgetExceeded: return "BudgetExceeded";
    case BackendError::Kind::BadResponse: return "BadResponse";
  }
  return "?";
}

std::string CompletionBackend::complete(const PromptText& prompt, const CompletionParams& params) {
  if (prompt.text.empty()) throw std::invalid_argument("complete: empty prompt");
  params.check();
  const std::size_t n = ++queries_;
  if (query_cap_ && n > *query_cap_)
    throw BackendError(BackendError::Kind::BudgetExceeded,
                       "query cap of " + std::to_string(*query_cap_) + " reached");
  return do_complete(prompt, params);
}

// ---------------------------------------------------------------------------

EffectMask default_effect_mask() {
  EffectMask m{};
  for (Attribute e : kAttributes)
    if (e != Attribute::truth) m[index(e)][index(Attribute::truth)] = true;
  return m;
}

EffectMask no_effect_mask() { return EffectMask{}; }

SyntheticIteConfig SyntheticIteConfig::random_means(const StatementBank& bank, std::uint64_t seed,
                                                    double lo, double hi) {
  if (!(lo >= 1.0 && hi <= 6.0 && lo <= hi)) throw std::invalid_argument("base means must lie in [1, 6]");
  SyntheticIteConfig cfg;
  Rng rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (const auto& s : bank.statements()) {
    auto& row = cfg.base_mean[s.id];
    for (auto& m : row) m = u(rng);
  }
  return cfg;
}

void SyntheticIteConfig::check() const {
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("noise_sd must be >= 0");
  if (!std::isfinite(effect_offset) || !std::isfinite(effect_tilt))
    throw std::invalid_argument("effect parameters must be finite");
  for (const auto& [id, row] : base_mean)
    for (double m : row)
      if (!(m >= 1.0 && m <= 6.0)) throw std::invalid_argument("base mean for " + id + " outside [1, 6]");
}

double synth_ite_mean(std::string_view statement_id, Attribute test_attr,
                      std::optional<Attribute> exposure_attr, const SyntheticIteConfig& cfg) {
  auto it = cfg.base_mean.find(std::string(statement_id));
  if (it == cfg.base_mean.end())
    throw std::out_of_range("no base mean for statement " + std::string(statement_id));
  const double base = it->second[index(test_attr)];
  if (exposure_attr && cfg.effect_applies[index(*exposure_attr)][index(test_attr)])
    return base + cfg.effect_offset + cfg.effect_tilt * (base - 3.5);
  return base;
}

int synth_ite_rate(std::string_view statement_id, Attribute test_attr,
                   std::optional<Attribute> exposure_attr, const SyntheticIteConfig& cfg, Rng& rng,
                   double temperature) {
  const double mean = synth_ite_mean(statement_id, test_attr, exposure_attr, cfg);
  const double z = std::normal_distribution<double>(0.0, 1.0)(rng);
  return round_clip(mean + cfg.noise_sd * temperature * z, kIteScale);
}

SyntheticIteBackend::SyntheticIteBackend(const StatementBank& bank, SyntheticIteConfig cfg, std::uint64_t seed)
    : bank_(&bank), cfg_(std::move(cfg)), seed_(seed) {
  cfg_.check();
}

namespace {

constexpr std::string_view kRecapPrefix = "Earlier you rated the ";

/// Parses `Earlier you rated the <attr> of "<text>" as ...` lines.
std::map<std::string, Attribute> read_recap(std::string_view prompt) {
  std::map<std::string, Attribute> out;
  for (auto line : txt::lines(prompt)) {
    if (!txt::starts_with(line, kRecapPrefix)) continue;
    line.remove_prefix(kRecapPrefix.size());
    const auto of = line.find(" of \"");
    const auto as = line.rfind("\" as ");
    if (of == std::string_view::npos || as == std::string_view::npos || as < of + 5) continue;
    if (auto a = attribute_from_name(line.substr(0, of)))
      out.emplace(std::string(line.substr(of + 5, as - of - 5)), *a);
  }
  return out;
}

struct ListedItem {
  Attribute attribute;
  std::string text;
};

std::vector<ListedItem> read_statement_list(std::string_view prompt) {
  std::vector<ListedItem> out;
  bool inside = false;
  for (auto line : txt::lines(prompt)) {
    if (line == "<< statement list >>") {
      inside = true;
      continue;
    }
    if (line == "<< end list >>") break;
    if (!inside || line.size() < 6 || line.substr(0, 2) != "# " || line.substr(3, 3) != " | ") continue;
    if (auto a = attribute_from_code(line[2])) out.push_back({*a, std::string(line.substr(6))});
  }
  return out;
}

}  // namespace

std::string SyntheticIteBackend::do_complete(const PromptText& prompt, const CompletionParams& params) {
  if (prompt.phase == Phase::pfn_probe) throw std::invalid_argument("synthetic-ite backend got a PFN prompt");
  const auto exposure = read_recap(prompt.text);
  Rng rng(derive_seed(seed_, params.seed, fnv1a(prompt.text)));
  std::string out;
  for (const auto& item : read_statement_list(prompt.text)) {
    const auto idx = bank_->index_of_text(item.text);
    if (!idx) throw BackendError(BackendError::Kind::BadResponse, "unknown statement in prompt: " + item.text);
    std::optional<Attribute> exposed;
    if (auto it = exposure.find(item.text); it != exposure.end()) exposed = it->second;
    const int v = synth_ite_rate((*bank_)[*idx].id, item.attribute, exposed, cfg_, rng, params.temperature);
    out += completion_line(item.text, item.attribute, v);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

double PfnCoefficients::linear_predictor(const std::string& country_name, bool e_flag, bool i_flag,
                                         double dep) const {
  const double e_ = e_flag ? 1.0 : 0.0;
  const double i_ = i_flag ? 1.0 : 0.0;
  double y = intercept + e * e_ + i * i_ + ei * e_ * i_ + d * dep + de * dep * e_ + di * dep * i_ +
             dei * dep * e_ * i_;
  if (auto it = country.find(country_name); it != country.end()) y += it->second;
  return y;
}

void SyntheticPfnConfig::check() const {
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("noise_sd must be >= 0");
  for (const auto* c : {&persuasion, &mobilization}) {
    for (double v : {c->intercept, c->e, c->i, c->ei, c->d, c->de, c->di, c->dei})
      if (!std::isfinite(v)) throw std::invalid_argument("PFN coefficients must be finite");
    for (const auto& [name, v] : c->country)
      if (!std::isfinite(v)) throw std::invalid_argument("country effect for " + name + " is not finite");
  }
}

PfnCoefficients plant_nested_targets(const NestedModelTargets& t, double mean_d, double intercept) {
  PfnCoefficients c;
  c.intercept = intercept;
  c.dei = t.dei;
  c.de = t.de - t.dei / 2.0;
  c.di = t.di - t.dei / 2.0;
  c.d = t.d - c.de / 2.0 - c.di / 2.0 - c.dei / 4.0;
  c.ei = t.ei - c.dei * mean_d;
  c.e = t.e - c.ei / 2.0 - c.de * mean_d - c.dei * mean_d / 2.0;
  c.i = t.i - c.ei / 2.0 - c.di * mean_d - c.dei * mean_d / 2.0;
  return c;
}

int synth_pfn_rate(const std::string& country, ArticleKind article, double deprivation, ProbeKind probe,
                   const SyntheticPfnConfig& cfg, Rng& rng, double temperature) {
  const auto& coef = probe == ProbeKind::persuasion ? cfg.persuasion : cfg.mobilization;
  const double mean = coef.linear_predictor(country, anti_elitist(article), anti_immigrant(article), deprivation);
  const double z = std::normal_distribution<double>(0.0, 1.0)(rng);
  return round_clip(mean + cfg.noise_sd * temperature * z, kAgreementScale);
}

SyntheticPfnBackend::SyntheticPfnBackend(PfnContext ctx, SyntheticPfnConfig cfg, std::uint64_t seed)
    : ctx_(std::move(ctx)), cfg_(std::move(cfg)), seed_(seed) {
  cfg_.check();
}

std::string SyntheticPfnBackend::do_complete(const PromptText& prompt, const CompletionParams& params) {
  if (prompt.phase != Phase::pfn_probe || prompt.expected_items.size() != 1)
    throw std::invalid_argument("synthetic-pfn backend needs a single-probe PFN prompt");
  const auto* probe = ctx_.probes.find(prompt.expected_items.front().id);
  if (!probe) throw BackendError(BackendError::Kind::BadResponse, "unknown probe " + prompt.expected_items.front().id);

  std::optional<std::string> country;
  std::array<std::optional<int>, 3> dep;
  for (auto line : txt::lines(prompt.text)) {
    if (txt::starts_with(line, "Country: ")) country = std::string(txt::trim(line.substr(9)));
    for (std::size_t k = 0; k < 3; ++k) {
      const auto& s = ctx_.deprivation_statements[k];
      if (line.size() > s.size() + 2 && txt::starts_with(line, s) && line.substr(s.size(), 2) == ": ")
        dep[k] = std::stoi(std::string(line.substr(s.size() + 2)));
    }
  }
  const auto article = ctx_.articles.identify(prompt.text);
  if (!country || !dep[0] || !dep[1] || !dep[2] || !article)
    throw BackendError(BackendError::Kind::BadResponse, "synthetic-pfn backend could not read the survey prompt");

  const double score = (*dep[0] + *dep[1] + *dep[2]) / 3.0;
  Rng rng(derive_seed(seed_, params.seed, fnv1a(prompt.text)));
  return " " + std::to_string(synth_pfn_rate(*country, *article, score, probe->kind, cfg_, rng, params.temperature));
}

}  // namespace influence
