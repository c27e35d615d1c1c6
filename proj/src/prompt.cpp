#include "influence/prompt.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "text_util.hpp"

namespace influence {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// File contents without trailing newlines.
std::string read_section(const std::filesystem::path& path) {
  std::string s = read_file(path);
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

std::string join_sections(const std::vector<std::string>& sections) {
  std::string out;
  for (const auto& s : sections) {
    if (s.empty()) continue;
    if (!out.empty()) out += "\n\n";
    out += s;
  }
  return out;
}

}  // namespace

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  for (;;) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) throw std::invalid_argument("unterminated placeholder in template");
    out.append(tmpl.substr(pos, open - pos));
    const std::string name(txt::trim(tmpl.substr(open + 2, close - open - 2)));
    auto it = values.find(name);
    if (it == values.end()) throw std::invalid_argument("unknown template placeholder {{" + name + "}}");
    out += it->second;
    pos = close + 2;
  }
  out.append(tmpl.substr(pos));
  return out;
}

std::string_view article_kind_name(ArticleKind k) {
  switch (k) {
    case ArticleKind::none: return "none";
    case ArticleKind::anti_elitist: return "anti_elitist";
    case ArticleKind::anti_immigrant: return "anti_immigrant";
    case ArticleKind::both: return "both";
  }
  return "?";
}

std::optional<ArticleKind> article_kind_from_name(std::string_view name) {
  for (auto k : kArticleKinds)
    if (article_kind_name(k) == name) return k;
  return std::nullopt;
}

ArticleSet::ArticleSet(std::array<std::string, 4> texts) {
  std::set<std::string> distinct;
  for (std::size_t i = 0; i < 4; ++i) {
    if (txt::trim(texts[i]).empty()) throw std::invalid_argument("article variant is empty");
    distinct.insert(texts[i]);
    variants_[i] = {kArticleKinds[i], std::move(texts[i])};
  }
  if (distinct.size() != 4) throw std::invalid_argument("article variants must be distinct");
}

std::optional<ArticleKind> ArticleSet::identify(std::string_view prompt) const {
  std::optional<ArticleKind> best;
  std::size_t best_len = 0;
  for (const auto& v : variants_)
    if (v.text.size() > best_len && prompt.find(v.text) != std::string_view::npos) {
      best = v.kind;
      best_len = v.text.size();
    }
  return best;
}

ArticleSet load_articles(const std::filesystem::path& dir) {
  std::array<std::string, 4> texts;
  for (std::size_t i = 0; i < 4; ++i)
    texts[i] = read_section(dir / (std::string(article_kind_name(kArticleKinds[i])) + ".txt"));
  return ArticleSet(std::move(texts));
}

std::string_view probe_kind_name(ProbeKind k) {
  return k == ProbeKind::persuasion ? "persuasion" : "mobilization";
}

ProbeSet::ProbeSet(std::vector<ProbeStatement> probes) : probes_(std::move(probes)) {
  std::size_t persuasion = 0, mobilization = 0;
  std::set<std::string> ids;
  for (const auto& p : probes_) {
    if (!ids.insert(p.id).second) throw std::invalid_argument("duplicate probe id " + p.id);
    if (p.text.empty()) throw std::invalid_argument("empty probe text for " + p.id);
    (p.kind == ProbeKind::persuasion ? persuasion : mobilization)++;
  }
  if (persuasion != 2 || mobilization != 3)
    throw std::invalid_argument("probe set needs 2 persuasion and 3 mobilization probes, got " +
                                std::to_string(persuasion) + " and " + std::to_string(mobilization));
}

const ProbeStatement* ProbeSet::find(std::string_view id) const {
  for (const auto& p : probes_)
    if (p.id == id) return &p;
  return nullptr;
}

ProbeSet load_probes(const std::filesystem::path& path) {
  std::vector<ProbeStatement> probes;
  std::size_t line_no = 0;
  const std::string content = read_file(path);
  for (auto line : txt::lines(content)) {
    ++line_no;
    line = txt::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto f = txt::split(line, '|');
    if (f.size() != 3) throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": expected 3 fields");
    const auto kind = txt::trim(f[1]);
    ProbeStatement p;
    p.id = std::string(txt::trim(f[0]));
    if (kind == "persuasion") p.kind = ProbeKind::persuasion;
    else if (kind == "mobilization") p.kind = ProbeKind::mobilization;
    else throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": unknown probe kind");
    p.text = std::string(txt::trim(f[2]));
    probes.push_back(std::move(p));
  }
  return ProbeSet(std::move(probes));
}

std::array<std::string, 3> load_deprivation_statements(const std::filesystem::path& path) {
  std::vector<std::string> out;
  const std::string content = read_file(path);
  for (auto line : txt::lines(content)) {
    line = txt::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto f = txt::split(line, '|');
    if (f.size() != 2) throw std::invalid_argument(path.string() + ": expected `id | text`");
    out.emplace_back(txt::trim(f[1]));
  }
  if (out.size() != 3) throw std::invalid_argument(path.string() + ": need exactly 3 deprivation statements");
  return {out[0], out[1], out[2]};
}

TemplateSet load_templates(const std::filesystem::path& dir) {
  TemplateSet t;
  t.ite_scales = read_section(dir / "ite_scales.txt");
  t.ite_task = read_section(dir / "ite_task.txt");
  t.ite_instructions = read_section(dir / "ite_instructions.txt");
  t.ite_recap_intro = read_section(dir / "ite_recap_intro.txt");
  t.ite_cue = read_section(dir / "ite_cue.txt");
  t.pfn_demographics = read_section(dir / "pfn_demographics.txt");
  t.pfn_deprivation_intro = read_section(dir / "pfn_deprivation_intro.txt");
  t.pfn_article_intro = read_section(dir / "pfn_article_intro.txt");
  t.pfn_persuasion_probe = read_section(dir / "pfn_persuasion_probe.txt");
  t.pfn_mobilization_probe = read_section(dir / "pfn_mobilization_probe.txt");
  return t;
}

std::size_t approx_tokens(std::string_view text) { return (text.size() + 3) / 4; }

std::string recap_line(Attribute attribute, std::string_view statement_text, int value) {
  std::string out = "Earlier you rated the ";
  out += attribute_name(attribute);
  out += " of \"";
  out += statement_text;
  out += "\" as ";
  out += scale_label(attribute, value);
  out += '.';
  return out;
}

std::string item_line(Attribute attribute, std::string_view statement_text) {
  std::string out = "# ";
  out += attribute_code(attribute);
  out += " | ";
  out += statement_text;
  return out;
}

std::string completion_line(std::string_view statement_text, Attribute attribute, int value) {
  std::string out = "\"";
  out += statement_text;
  out += "\" | ";
  out += scale_label(attribute, value);
  return out;
}

PromptBuilder::PromptBuilder(const StatementBank& bank, TemplateSet templates, PromptOptions options)
    : bank_(&bank), templates_(std::move(templates)), options_(std::move(options)) {}

std::string PromptBuilder::scales_section() const {
  std::string scales;
  for (Attribute a : kAttributes) {
    std::string name(attribute_name(a));
    name[0] = static_cast<char>(name[0] - 'a' + 'A');
    if (!scales.empty()) scales += '\n';
    scales += name + " (" + attribute_code(a) + "): ";
    for (int v = 1; v <= 6; ++v) {
      if (v > 1) scales += ", ";
      scales += scale_label(a, v);
    }
  }
  return render_template(templates_.ite_scales, {{"scales", scales}});
}

std::vector<ExpectedItem> PromptBuilder::expected(const std::vector<DesignItem>& items) const {
  std::vector<ExpectedItem> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back({it.statement_id, bank_->at(it.statement_id).text, it.attribute, 6});
  return out;
}

std::string PromptBuilder::item_block(const std::vector<ExpectedItem>& items) const {
  std::string out = "<< statement list >>\n";
  for (const auto& it : items) out += item_line(*it.attribute, it.text) + '\n';
  out += "<< end list >>";
  return out;
}

void PromptBuilder::enforce_budget(PromptText& p) const {
  std::size_t completion = 0;
  for (const auto& it : p.expected_items) {
    std::size_t longest = 0;
    for (int v = 1; v <= 6; ++v)
      longest = std::max(longest, options_.estimator(completion_line(it.text, *it.attribute, v) + '\n'));
    completion += longest;
  }
  p.completion_token_estimate = completion;
  const std::size_t total = options_.estimator(p.text) + completion;
  if (total > options_.token_budget)
    throw PromptError(PromptError::Kind::BudgetExceeded,
                      "prompt plus worst-case completion needs ~" + std::to_string(total) +
                          " tokens, budget is " + std::to_string(options_.token_budget));
}

PromptText PromptBuilder::exposure_prompt(const ParticipantDesign& design) const {
  if (design.exposure_items.empty())
    throw PromptError(PromptError::Kind::EmptyDesign,
                      "participant " + std::to_string(design.participant_id) + " has no exposure items");
  PromptText p;
  p.phase = Phase::ite_exposure;
  p.expected_items = expected(design.exposure_items);
  p.text = join_sections({scales_section(), templates_.ite_task, templates_.ite_instructions,
                          item_block(p.expected_items), templates_.ite_cue}) +
           '\n';
  enforce_budget(p);
  return p;
}

PromptText PromptBuilder::test_prompt(const ParticipantDesign& design,
                                      const std::vector<RatingRecord>& exposure_ratings) const {
  if (design.test_items.empty())
    throw PromptError(PromptError::Kind::EmptyDesign,
                      "participant " + std::to_string(design.participant_id) + " has no test items");
  std::map<std::string, const RatingRecord*> by_id;
  for (const auto& r : exposure_ratings) {
    if (!by_id.emplace(r.item_id, &r).second)
      throw PromptError(PromptError::Kind::RecapMismatch, "surplus exposure rating for " + r.item_id);
  }
  std::string recap = templates_.ite_recap_intro;
  for (const auto& it : design.exposure_items) {
    auto found = by_id.find(it.statement_id);
    if (found == by_id.end())
      throw PromptError(PromptError::Kind::RecapMismatch, "missing exposure rating for " + it.statement_id);
    const RatingRecord& r = *found->second;
    if (r.attribute != it.attribute)
      throw PromptError(PromptError::Kind::RecapMismatch,
                        "exposure rating for " + it.statement_id + " has the wrong attribute");
    if (!recap.empty()) recap += '\n';
    recap += recap_line(it.attribute, bank_->at(it.statement_id).text, r.value);
    by_id.erase(found);
  }
  if (!by_id.empty())
    throw PromptError(PromptError::Kind::RecapMismatch,
                      "surplus exposure rating for " + by_id.begin()->first);

  PromptText p;
  p.phase = Phase::ite_test;
  p.expected_items = expected(design.test_items);
  p.text = join_sections({scales_section(), templates_.ite_task, recap, templates_.ite_instructions,
                          item_block(p.expected_items), templates_.ite_cue}) +
           '\n';
  enforce_budget(p);
  return p;
}

std::string education_label(int level) {
  switch (level) {
    case 1: return "Lower secondary or less";
    case 2: return "Upper secondary";
    case 3: return "Tertiary";
  }
  throw std::out_of_range("education level " + std::to_string(level));
}

std::string political_interest_label(int level) {
  switch (level) {
    case 1: return "Not at all interested";
    case 2: return "Not very interested";
    case 3: return "Fairly interested";
    case 4: return "Very interested";
  }
  throw std::out_of_range("political interest level " + std::to_string(level));
}

PromptText build_pfn_prompt(const PfnContext& ctx, const DemographicProfile& profile,
                            const DeprivationTriple& deprivation, ArticleKind article,
                            const ProbeStatement& probe) {
  if (ctx.probes.find(probe.id) == nullptr)
    throw PromptError(PromptError::Kind::BadProbe, "probe " + probe.id + " is not configured");
  for (int r : deprivation.ratings)
    if (!kAgreementScale.contains(r)) throw std::out_of_range("deprivation rating outside 1..7");

  const std::string demographics = render_template(
      ctx.templates.pfn_demographics, {{"country", profile.country},
                                       {"gender", std::string(gender_name(profile.gender))},
                                       {"age", std::to_string(profile.age)},
                                       {"education", education_label(profile.education)},
                                       {"political_interest", political_interest_label(profile.political_interest)},
                                       {"ideology", std::to_string(profile.ideology)}});
  std::string dep = ctx.templates.pfn_deprivation_intro;
  for (std::size_t i = 0; i < 3; ++i)
    dep += '\n' + ctx.deprivation_statements[i] + ": " + std::to_string(deprivation.ratings[i]);

  const std::string article_block = ctx.templates.pfn_article_intro + '\n' + ctx.articles[article].text;
  const auto& probe_tmpl = probe.kind == ProbeKind::persuasion ? ctx.templates.pfn_persuasion_probe
                                                               : ctx.templates.pfn_mobilization_probe;
  PromptText p;
  p.phase = Phase::pfn_probe;
  p.expected_items = {{probe.id, probe.text, std::nullopt, 7}};
  p.text = join_sections({demographics, dep, article_block, render_template(probe_tmpl, {{"probe", probe.text}})});
  p.completion_token_estimate = 4;
  return p;
}

}  // namespace influence
