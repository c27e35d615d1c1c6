#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "influence/core.hpp"
#include "influence/design.hpp"
#include "influence/sampler.hpp"
#include "influence/statement_bank.hpp"

namespace influence {

/// Substitutes `{{name}}` placeholders. Unknown placeholders are an error.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

struct ExpectedItem {
  std::string id;    // statement id or probe id
  std::string text;  // the text the completion must echo (ITE) or the probe text
  std::optional<Attribute> attribute;
  int scale_max = 6;
  bool operator==(const ExpectedItem&) const = default;
};

struct PromptText {
  std::string text;
  std::vector<ExpectedItem> expected_items;
  Phase phase = Phase::ite_exposure;
  std::size_t completion_token_estimate = 0;
};

enum class ArticleKind : std::uint8_t { none = 0, anti_elitist = 1, anti_immigrant = 2, both = 3 };

inline constexpr std::array<ArticleKind, 4> kArticleKinds = {
    ArticleKind::none, ArticleKind::anti_elitist, ArticleKind::anti_immigrant, ArticleKind::both};

std::string_view article_kind_name(ArticleKind k);
std::optional<ArticleKind> article_kind_from_name(std::string_view name);
constexpr bool anti_elitist(ArticleKind k) { return k == ArticleKind::anti_elitist || k == ArticleKind::both; }
constexpr bool anti_immigrant(ArticleKind k) { return k == ArticleKind::anti_immigrant || k == ArticleKind::both; }

struct ArticleVariant {
  ArticleKind kind;
  std::string text;
};

/// The four article files `none.txt`, `anti_elitist.txt`, `anti_immigrant.txt`, `both.txt`.
class ArticleSet {
 public:
  explicit ArticleSet(std::array<std::string, 4> texts);
  const ArticleVariant& operator[](ArticleKind k) const { return variants_[static_cast<std::size_t>(k)]; }
  /// Longest article text contained verbatim in `prompt`, if any.
  std::optional<ArticleKind> identify(std::string_view prompt) const;

 private:
  std::array<ArticleVariant, 4> variants_;
};

ArticleSet load_articles(const std::filesystem::path& dir);

enum class ProbeKind : std::uint8_t { persuasion, mobilization };
std::string_view probe_kind_name(ProbeKind k);

struct ProbeStatement {
  std::string id;
  ProbeKind kind;
  std::string text;
};

/// Two persuasion probes and three mobilization probes, in file order.
class ProbeSet {
 public:
  explicit ProbeSet(std::vector<ProbeStatement> probes);
  const std::vector<ProbeStatement>& probes() const { return probes_; }
  const ProbeStatement* find(std::string_view id) const;

 private:
  std::vector<ProbeStatement> probes_;
};

/// `id | persuasion|mobilization | text` lines.
ProbeSet load_probes(const std::filesystem::path& path);

/// `id | text` lines; exactly three.
std::array<std::string, 3> load_deprivation_statements(const std::filesystem::path& path);

/// Editable prose around the frozen prompt structure.
struct TemplateSet {
  std::string ite_scales;        // {{scales}}
  std::string ite_task;
  std::string ite_instructions;
  std::string ite_recap_intro;
  std::string ite_cue;
  std::string pfn_demographics;  // {{country}} {{gender}} {{age}} {{education}} {{political_interest}} {{ideology}}
  std::string pfn_deprivation_intro;
  std::string pfn_article_intro;
  std::string pfn_persuasion_probe;    // {{probe}}
  std::string pfn_mobilization_probe;  // {{probe}}
};

TemplateSet load_templates(const std::filesystem::path& dir);

using TokenEstimator = std::function<std::size_t(std::string_view)>;

/// Roughly four bytes per token, rounded up.
std::size_t approx_tokens(std::string_view text);

class PromptError : public std::runtime_error {
 public:
  enum class Kind { EmptyDesign, RecapMismatch, BudgetExceeded, BadProbe };
  PromptError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct PromptOptions {
  std::size_t token_budget = 4000;
  TokenEstimator estimator = approx_tokens;
};

/// Formats the recap line for one exposure rating.
std::string recap_line(Attribute attribute, std::string_view statement_text, int value);

/// Formats the item line `# <CODE> | <statement text>`.
std::string item_line(Attribute attribute, std::string_view statement_text);

/// Formats the completion line `"<statement>" | <CODE><digit>: <phrase>`.
std::string completion_line(std::string_view statement_text, Attribute attribute, int value);

class PromptBuilder {
 public:
  PromptBuilder(const StatementBank& bank, TemplateSet templates, PromptOptions options = {});

  PromptText exposure_prompt(const ParticipantDesign& design) const;
  PromptText test_prompt(const ParticipantDesign& design,
                         const std::vector<RatingRecord>& exposure_ratings) const;

  const TemplateSet& templates() const { return templates_; }

 private:
  std::string scales_section() const;
  std::vector<ExpectedItem> expected(const std::vector<DesignItem>& items) const;
  std::string item_block(const std::vector<ExpectedItem>& items) const;
  void enforce_budget(PromptText& p) const;

  const StatementBank* bank_;
  TemplateSet templates_;
  PromptOptions options_;
};

struct PfnContext {
  std::array<std::string, 3> deprivation_statements;
  ArticleSet articles;
  ProbeSet probes;
  TemplateSet templates;
};

std::string education_label(int level);
std::string political_interest_label(int level);

PromptText build_pfn_prompt(const PfnContext& ctx, const DemographicProfile& profile,
                            const DeprivationTriple& deprivation, ArticleKind article,
                            const ProbeStatement& probe);

}  // namespace influence
