#include "influence/parser.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <cctype>
#include <sstream>

#include "influence/statement_bank.hpp"
#include "text_util.hpp"

namespace influence {

std::string_view parse_error_kind_name(ParseErrorKind k) {
  switch (k) {
    case ParseErrorKind::MissingItem: return "MissingItem";
    case ParseErrorKind::SurplusItem: return "SurplusItem";
    case ParseErrorKind::EchoMismatch: return "EchoMismatch";
    case ParseErrorKind::BadCode: return "BadCode";
    case ParseErrorKind::OutOfRange: return "OutOfRange";
    case ParseErrorKind::Malformed: return "Malformed";
    case ParseErrorKind::NonNumericFirstToken: return "NonNumericFirstToken";
  }
  return "?";
}

std::string ParseResult::error_summary() const {
  std::ostringstream os;
  for (const auto& e : errors) {
    os << parse_error_kind_name(e.kind);
    if (e.line_no) os << " (line " << e.line_no << ")";
    os << ": " << e.detail << '\n';
  }
  return os.str();
}

std::string normalize_echo(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  std::string normalized;
  if (U_SUCCESS(status)) {
    const auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    const icu::UnicodeString out = nfc->normalize(src, status);
    if (U_SUCCESS(status)) out.toUTF8String(normalized);
  }
  if (U_FAILURE(status)) normalized.assign(text);

  std::string collapsed;
  collapsed.reserve(normalized.size());
  bool pending_space = false;
  for (char c : normalized) {
    if (txt::is_space(c)) {
      pending_space = !collapsed.empty();
      continue;
    }
    if (pending_space) collapsed += ' ';
    pending_space = false;
    collapsed += c;
  }
  return collapsed;
}

namespace {

struct LineFields {
  std::string_view echo;
  std::string_view label;
};

/// Splits `"<echo>" | <label>`; nullopt when the quoting or separator is off.
std::optional<LineFields> split_line(std::string_view line) {
  if (line.size() < 2 || line.front() != '"') return std::nullopt;
  const auto close = line.find('"', 1);
  if (close == std::string_view::npos) return std::nullopt;
  const auto rest = line.substr(close);
  if (!txt::starts_with(rest, "\" | ")) return std::nullopt;
  return LineFields{line.substr(1, close - 1), rest.substr(4)};
}

struct LabelCheck {
  std::optional<ParseError> error;
  int value = 0;
};

LabelCheck check_label(std::string_view label, Attribute expected_attr, std::size_t line_no) {
  auto fail = [&](ParseErrorKind k, std::string detail) {
    return LabelCheck{ParseError{k, line_no, std::move(detail)}, 0};
  };
  if (label.empty()) return fail(ParseErrorKind::Malformed, "missing rating label");
  const auto attr = attribute_from_code(label[0]);
  if (!attr) return fail(ParseErrorKind::BadCode, "unknown attribute code '" + std::string(1, label[0]) + "'");
  std::size_t i = 1;
  while (i < label.size() && std::isdigit(static_cast<unsigned char>(label[i]))) ++i;
  if (i == 1) return fail(ParseErrorKind::Malformed, "no rating digit after code");
  if (i > 3) return fail(ParseErrorKind::OutOfRange, "rating '" + std::string(label.substr(1, i - 1)) + "' outside 1..6");
  const int value = std::stoi(std::string(label.substr(1, i - 1)));
  if (!kIteScale.contains(value))
    return fail(ParseErrorKind::OutOfRange, "rating " + std::to_string(value) + " outside 1..6");
  if (label.substr(i, 2) != ": ") return fail(ParseErrorKind::Malformed, "expected ': ' after rating");
  if (!parse_scale_label(label))
    return fail(ParseErrorKind::BadCode, "label '" + std::string(label) + "' does not match its code");
  if (*attr != expected_attr)
    return fail(ParseErrorKind::BadCode, "expected attribute code " + std::string(1, attribute_code(expected_attr)) +
                                             ", got " + std::string(1, label[0]));
  return LabelCheck{std::nullopt, value};
}

}  // namespace

ParseResult parse_ite_completion(std::string_view completion, const PromptText& expected,
                                 std::uint32_t participant_id) {
  if (expected.phase == Phase::pfn_probe)
    throw std::invalid_argument("parse_ite_completion: prompt is not an ITE prompt");
  const auto& items = expected.expected_items;
  std::vector<std::string> want;
  want.reserve(items.size());
  for (const auto& it : items) want.push_back(normalize_echo(it.text));

  ParseResult result;
  std::size_t next = 0;
  auto missing = [&](std::size_t upto, std::size_t line_no) {
    for (; next < upto; ++next)
      result.errors.push_back({ParseErrorKind::MissingItem, line_no, "no rating for " + items[next].id});
  };

  std::size_t line_no = 0;
  for (auto raw : txt::lines(completion)) {
    ++line_no;
    const auto line = txt::trim(raw);
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (next >= items.size()) {
      result.errors.push_back({ParseErrorKind::SurplusItem, line_no, "line after the last expected item"});
      continue;
    }
    if (!fields) {
      result.errors.push_back({ParseErrorKind::Malformed, line_no,
                               "expected `\"<statement>\" | <CODE><digit>: <phrase>` for " + items[next].id});
      ++next;
      continue;
    }
    const std::string echo = normalize_echo(fields->echo);
    std::size_t match = next;
    if (echo != want[next]) {
      match = items.size();
      for (std::size_t j = next + 1; j < items.size(); ++j)
        if (echo == want[j]) {
          match = j;
          break;
        }
      if (match == items.size()) {
        result.errors.push_back({ParseErrorKind::EchoMismatch, line_no,
                                 "echo does not match statement " + items[next].id});
        ++next;
        continue;
      }
      missing(match, line_no);
    }
    const auto& item = items[match];
    const auto label = check_label(fields->label, *item.attribute, line_no);
    if (label.error) {
      result.errors.push_back(*label.error);
    } else {
      result.records.push_back(RatingRecord{participant_id, expected.phase, item.id, item.attribute,
                                            label.value, 6, std::string(line)});
    }
    next = match + 1;
  }
  missing(items.size(), 0);
  if (!result.ok()) result.records.clear();
  return result;
}

ParseResult parse_pfn_completion(std::string_view completion, const PromptText& expected,
                                 std::uint32_t participant_id, bool strict) {
  if (expected.phase != Phase::pfn_probe || expected.expected_items.size() != 1)
    throw std::invalid_argument("parse_pfn_completion: prompt is not a single-probe PFN prompt");
  const auto& item = expected.expected_items.front();
  const ScaleBounds bounds{1, item.scale_max};

  ParseResult result;
  const auto body = txt::trim(completion);
  const auto first_line = txt::trim(txt::lines(body).front());
  std::size_t start = 0;
  if (!strict) {
    while (start < body.size() && !std::isdigit(static_cast<unsigned char>(body[start]))) ++start;
  }
  std::size_t end = start;
  while (end < body.size() && std::isdigit(static_cast<unsigned char>(body[end]))) ++end;
  if (end == start) {
    result.errors.push_back({ParseErrorKind::NonNumericFirstToken, 1,
                             "completion does not start with a rating: '" + std::string(first_line) + "'"});
    return result;
  }
  const auto digits = body.substr(start, end - start);
  const int value = digits.size() > 2 ? 100 : std::stoi(std::string(digits));
  if (!bounds.contains(value)) {
    result.errors.push_back({ParseErrorKind::OutOfRange, 1,
                             "rating " + std::string(digits) + " outside 1.." + std::to_string(bounds.hi)});
    return result;
  }
  const auto line_begin = body.rfind('\n', start);
  const auto line_from = line_begin == std::string_view::npos ? 0 : line_begin + 1;
  const auto raw = txt::trim(body.substr(line_from, body.find('\n', start) - line_from));
  result.records.push_back(RatingRecord{participant_id, Phase::pfn_probe, item.id, std::nullopt, value,
                                        item.scale_max, std::string(raw)});
  return result;
}

}  // namespace influence
