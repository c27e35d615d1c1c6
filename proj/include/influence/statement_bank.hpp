#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "influence/core.hpp"

namespace influence {

enum class TruthClass : std::uint8_t { true_, false_, uncertain };

struct Statement {
  std::string id;
  std::string text;
  std::optional<TruthClass> truth_class;
};

/// Six-point scale for one attribute. labels[0] is the phrase for rating 1.
struct AttributeScale {
  Attribute attribute;
  char code;
  std::array<std::string_view, 6> labels;
};

const AttributeScale& scale_for(Attribute a);
std::optional<Attribute> attribute_from_code(char code);
char attribute_code(Attribute a);

/// `<CODE><digit>: <phrase>`, e.g. "I2: quite uninteresting".
std::string scale_label(Attribute a, int value);

/// Inverse of scale_label; nullopt unless `label` is exactly a label produced by it.
std::optional<std::pair<Attribute, int>> parse_scale_label(std::string_view label);

class BankError : public std::runtime_error {
 public:
  enum class Kind { EmptyBank, DuplicateId, DuplicateText, EmptyText, Malformed, Io };
  BankError(Kind kind, std::size_t line, const std::string& detail);
  Kind kind() const { return kind_; }
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

/// Immutable collection of statements with unique ids and texts.
class StatementBank {
 public:
  StatementBank() = default;
  explicit StatementBank(std::vector<Statement> statements);

  std::size_t size() const { return statements_.size(); }
  const std::vector<Statement>& statements() const { return statements_; }
  const Statement& operator[](std::size_t i) const { return statements_[i]; }

  const Statement* find(std::string_view id) const;
  const Statement& at(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;
  std::optional<std::size_t> index_of_text(std::string_view text) const;

 private:
  std::vector<Statement> statements_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::size_t> by_text_;
};

/// Reads `id | text | truth_class?` lines. Blank lines and lines starting with
/// '#' are skipped.
StatementBank read_bank(std::istream& in);
StatementBank load_bank(const std::filesystem::path& path);

}  // namespace influence
