#include <doctest.h>

#include <set>
#include <sstream>

#include "helpers.hpp"
#include "influence/statement_bank.hpp"

using namespace influence;

namespace {

StatementBank bank_from(const std::string& text) {
  std::istringstream in(text);
  return read_bank(in);
}

BankError::Kind error_kind(const std::string& text) {
  try {
    bank_from(text);
  } catch (const BankError& e) {
    return e.kind();
  }
  FAIL("expected a BankError");
  return BankError::Kind::Io;
}

}  // namespace

TEST_CASE("a single statement line makes a bank of one") {
  const auto bank = bank_from("s01 | The Philippines has a tricameral legislature | false\n");
  REQUIRE(bank.size() == 1);
  CHECK(bank[0].id == "s01");
  CHECK(bank[0].text == "The Philippines has a tricameral legislature");
  CHECK(bank[0].truth_class == TruthClass::false_);
  CHECK(bank.index_of("s01") == 0u);
  CHECK(bank.index_of_text("The Philippines has a tricameral legislature") == 0u);
  CHECK(bank.find("s02") == nullptr);
}

TEST_CASE("truth class is optional and comments are skipped") {
  const auto bank = bank_from("# header\n\ns01 | Most frogs are green\ns02 | Orchids are plants | true\n");
  REQUIRE(bank.size() == 2);
  CHECK_FALSE(bank[0].truth_class);
  CHECK(bank[1].truth_class == TruthClass::true_);
}

TEST_CASE("malformed banks are rejected with a kind") {
  CHECK(error_kind("") == BankError::Kind::EmptyBank);
  CHECK(error_kind("# only a comment\n") == BankError::Kind::EmptyBank);
  CHECK(error_kind("s01 | a\ns01 | b\n") == BankError::Kind::DuplicateId);
  CHECK(error_kind("s01 | same\ns02 | same\n") == BankError::Kind::DuplicateText);
  CHECK(error_kind("s01 |  \n") == BankError::Kind::EmptyText);
  CHECK(error_kind("no separator here\n") == BankError::Kind::Malformed);
  CHECK(error_kind("s01 | text | maybe\n") == BankError::Kind::Malformed);
  CHECK(error_kind("s01 | a \"quoted\" word\n") == BankError::Kind::Malformed);
}

TEST_CASE("duplicate id reports the offending line") {
  try {
    bank_from("s01 | a\ns02 | b\ns01 | c\n");
    FAIL("expected DuplicateId");
  } catch (const BankError& e) {
    CHECK(e.kind() == BankError::Kind::DuplicateId);
    CHECK(e.line() == 3);
  }
}

TEST_CASE("scale labels") {
  CHECK(scale_label(Attribute::interest, 2) == "I2: quite uninteresting");
  CHECK(scale_label(Attribute::sentiment, 3) == "S3: slightly sad");
  CHECK(scale_label(Attribute::truth, 6) == "T6: definitely true");
  CHECK_THROWS(scale_label(Attribute::truth, 0));
  CHECK_THROWS(scale_label(Attribute::truth, 7));
}

TEST_CASE("attribute codes are unique and scale labels parse back") {
  std::set<char> codes;
  for (Attribute a : kAttributes) {
    codes.insert(attribute_code(a));
    CHECK(attribute_from_code(attribute_code(a)) == a);
    for (int v = 1; v <= 6; ++v) {
      const auto parsed = parse_scale_label(scale_label(a, v));
      REQUIRE(parsed);
      CHECK(parsed->first == a);
      CHECK(parsed->second == v);
    }
  }
  CHECK(codes.size() == kNumAttributes);
  CHECK_FALSE(parse_scale_label("I2: quite uninterestingly"));
  CHECK_FALSE(parse_scale_label("I2 quite uninteresting"));
  CHECK_FALSE(parse_scale_label("X2: quite uninteresting"));
  CHECK_FALSE(parse_scale_label("I7: quite uninteresting"));
  CHECK_FALSE(parse_scale_label("T2: quite uninteresting"));
}

TEST_CASE("shipped bank has 100 classified statements") {
  const auto bank = load_bank(testing::data_dir() / "statements.txt");
  CHECK(bank.size() == 100);
  for (const auto& s : bank.statements()) CHECK(s.truth_class);
  CHECK(bank.index_of_text("Most frogs are green"));
}

TEST_CASE("missing bank file is an Io error") {
  try {
    load_bank("/nonexistent/statements.txt");
    FAIL("expected Io");
  } catch (const BankError& e) {
    CHECK(e.kind() == BankError::Kind::Io);
  }
}
