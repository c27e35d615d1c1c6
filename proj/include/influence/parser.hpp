#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "influence/core.hpp"
#include "influence/prompt.hpp"

namespace influence {

enum class ParseErrorKind : std::uint8_t {
  MissingItem,
  SurplusItem,
  EchoMismatch,
  BadCode,
  OutOfRange,
  Malformed,
  NonNumericFirstToken,
};

std::string_view parse_error_kind_name(ParseErrorKind k);

struct ParseError {
  ParseErrorKind kind;
  std::size_t line_no = 0;  // 1-based line in the completion; 0 when not tied to a line
  std::string detail;
};

struct ParseResult {
  std::vector<RatingRecord> records;
  std::vector<ParseError> errors;
  bool ok() const { return errors.empty(); }
  std::string error_summary() const;
};

/// NFC normalization followed by whitespace collapse and trim.
std::string normalize_echo(std::string_view text);

/// Expects one line `"<statement>" | <CODE><digit>: <phrase>` per expected item,
/// in prompt order. Blank lines are ignored. Every non-blank line that fails
/// produces exactly one error; any error fails the whole completion.
ParseResult parse_ite_completion(std::string_view completion, const PromptText& expected,
                                 std::uint32_t participant_id = 0);

/// The rating is the first integer token of the completion. In strict mode the
/// completion must start with it (after whitespace); otherwise the first integer
/// anywhere is taken.
ParseResult parse_pfn_completion(std::string_view completion, const PromptText& expected,
                                 std::uint32_t participant_id = 0, bool strict = true);

}  // namespace influence
