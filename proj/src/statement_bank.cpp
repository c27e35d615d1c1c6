#include "influence/statement_bank.hpp"

#include <fstream>

#include "text_util.hpp"

namespace influence {

namespace {

const std::array<AttributeScale, kNumAttributes> kScales = {{
    {Attribute::truth,
     'T',
     {"definitely false", "probably false", "possibly false", "possibly true", "probably true",
      "definitely true"}},
    {Attribute::interest,
     'I',
     {"very uninteresting", "quite uninteresting", "slightly uninteresting",
      "slightly interesting", "quite interesting", "very interesting"}},
    {Attribute::sentiment,
     'S',
     {"very sad", "quite sad", "slightly sad", "slightly cheerful", "quite cheerful",
      "very cheerful"}},
    {Attribute::importance,
     'M',
     {"very unimportant", "quite unimportant", "slightly unimportant", "slightly important",
      "quite important", "very important"}},
}};

std::optional<TruthClass> parse_truth_class(std::string_view s) {
  if (s == "true") return TruthClass::true_;
  if (s == "false") return TruthClass::false_;
  if (s == "uncertain") return TruthClass::uncertain;
  return std::nullopt;
}

}  // namespace

const AttributeScale& scale_for(Attribute a) { return kScales[index(a)]; }

std::optional<Attribute> attribute_from_code(char code) {
  for (const auto& s : kScales)
    if (s.code == code) return s.attribute;
  return std::nullopt;
}

char attribute_code(Attribute a) { return scale_for(a).code; }

std::string scale_label(Attribute a, int value) {
  if (!kIteScale.contains(value))
    throw std::out_of_range("rating " + std::to_string(value) + " outside 1..6");
  const auto& s = scale_for(a);
  std::string out;
  out += s.code;
  out += static_cast<char>('0' + value);
  out += ": ";
  out += s.labels[static_cast<std::size_t>(value - 1)];
  return out;
}

std::optional<std::pair<Attribute, int>> parse_scale_label(std::string_view label) {
  if (label.size() < 5 || label[2] != ':' || label[3] != ' ') return std::nullopt;
  const auto attr = attribute_from_code(label[0]);
  if (!attr || label[1] < '1' || label[1] > '6') return std::nullopt;
  const int value = label[1] - '0';
  if (scale_for(*attr).labels[static_cast<std::size_t>(value - 1)] != label.substr(4))
    return std::nullopt;
  return std::pair{*attr, value};
}

BankError::BankError(Kind kind, std::size_t line, const std::string& detail)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + detail : detail),
      kind_(kind),
      line_(line) {}

StatementBank::StatementBank(std::vector<Statement> statements)
    : statements_(std::move(statements)) {
  for (std::size_t i = 0; i < statements_.size(); ++i) {
    const auto& s = statements_[i];
    if (s.text.empty()) throw BankError(BankError::Kind::EmptyText, 0, "empty text for " + s.id);
    if (!by_id_.emplace(s.id, i).second)
      throw BankError(BankError::Kind::DuplicateId, 0, "duplicate id " + s.id);
    if (!by_text_.emplace(s.text, i).second)
      throw BankError(BankError::Kind::DuplicateText, 0, "duplicate text for " + s.id);
  }
}

const Statement* StatementBank::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &statements_[it->second];
}

const Statement& StatementBank::at(std::string_view id) const {
  if (const auto* s = find(id)) return *s;
  throw std::out_of_range("unknown statement id " + std::string(id));
}

std::optional<std::size_t> StatementBank::index_of(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> StatementBank::index_of_text(std::string_view text) const {
  auto it = by_text_.find(std::string(text));
  if (it == by_text_.end()) return std::nullopt;
  return it->second;
}

StatementBank read_bank(std::istream& in) {
  std::vector<Statement> out;
  std::unordered_map<std::string, std::size_t> seen_ids;
  std::unordered_map<std::string, std::size_t> seen_texts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string_view trimmed = txt::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;

    const auto fields = txt::split(trimmed, '|');
    if (fields.size() < 2 || fields.size() > 3)
      throw BankError(BankError::Kind::Malformed, line_no,
                      "expected `id | text | truth_class?`, got " + std::to_string(fields.size()) +
                          " fields");
    Statement s;
    s.id = std::string(txt::trim(fields[0]));
    s.text = std::string(txt::trim(fields[1]));
    if (s.id.empty() || s.id.find_first_of(" \t") != std::string::npos)
      throw BankError(BankError::Kind::Malformed, line_no, "bad statement id");
    if (s.text.empty()) throw BankError(BankError::Kind::EmptyText, line_no, "empty text for " + s.id);
    if (s.text.find('"') != std::string::npos)
      throw BankError(BankError::Kind::Malformed, line_no, "statement text may not contain '\"'");
    if (fields.size() == 3) {
      const auto tc = txt::trim(fields[2]);
      if (!tc.empty()) {
        s.truth_class = parse_truth_class(tc);
        if (!s.truth_class)
          throw BankError(BankError::Kind::Malformed, line_no,
                          "unknown truth class '" + std::string(tc) + "'");
      }
    }
    if (auto [it, fresh] = seen_ids.emplace(s.id, line_no); !fresh)
      throw BankError(BankError::Kind::DuplicateId, line_no,
                      "duplicate id " + s.id + " (first on line " + std::to_string(it->second) + ")");
    if (auto [it, fresh] = seen_texts.emplace(s.text, line_no); !fresh)
      throw BankError(BankError::Kind::DuplicateText, line_no,
                      "duplicate text (first on line " + std::to_string(it->second) + ")");
    out.push_back(std::move(s));
  }
  if (out.empty()) throw BankError(BankError::Kind::EmptyBank, 0, "statement bank is empty");
  return StatementBank(std::move(out));
}

StatementBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw BankError(BankError::Kind::Io, 0, "cannot open " + path.string());
  return read_bank(in);
}

}  // namespace influence
