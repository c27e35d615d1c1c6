#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "influence/core.hpp"
#include "influence/statement_bank.hpp"

namespace influence {

/// n x n array over symbols 0..n-1, row-major.
struct LatinSquare {
  std::size_t n = 0;
  std::vector<std::uint32_t> cells;

  std::uint32_t operator()(std::size_t row, std::size_t col) const { return cells[row * n + col]; }
  bool is_latin() const;
  bool operator==(const LatinSquare&) const = default;
};

/// Uniformly permutes rows, columns and symbols of the cyclic square of order n.
LatinSquare random_latin_square(std::size_t n, std::uint64_t seed);

/// Shape of one block. The default is the study geometry: 100 statements and
/// 100 participants per block, 4 attributes, 16 exposure-only, 16 test-only and
/// 16 both-phase statements per participant. Smaller geometries exist for tests.
struct DesignGeometry {
  std::size_t n = 100;
  std::size_t attributes = 4;
  std::size_t exposure_only_per_attr = 4;
  std::size_t test_only_per_attr = 4;

  std::size_t both_count() const { return attributes * attributes; }
  std::size_t exposure_length() const { return both_count() + attributes * exposure_only_per_attr; }
  std::size_t test_length() const { return both_count() + attributes * test_only_per_attr; }
  std::size_t symbols_used() const {
    return both_count() + attributes * (exposure_only_per_attr + test_only_per_attr);
  }
  void check() const;
};

struct DesignItem {
  std::string statement_id;
  Attribute attribute;
  bool operator==(const DesignItem&) const = default;
};

enum class Role : std::uint8_t { exposure_only, test_only, both };

struct CellRole {
  Role role;
  std::optional<Attribute> exposure_attr;
  std::optional<Attribute> test_attr;
  bool operator==(const CellRole&) const = default;
};

struct ParticipantDesign {
  std::uint32_t participant_id = 0;
  std::uint32_t block_id = 0;
  std::vector<DesignItem> exposure_items;
  std::vector<DesignItem> test_items;
  std::map<std::string, CellRole> cell_roles;
  bool operator==(const ParticipantDesign&) const = default;
};

struct Block {
  std::uint32_t block_id = 0;
  std::vector<ParticipantDesign> designs;
  bool operator==(const Block&) const = default;
};

/// Participant ids are block_id * geometry.n + row.
Block build_block(const StatementBank& bank, std::uint32_t block_id, std::uint64_t seed,
                  const DesignGeometry& geometry = {});

struct BalanceCheck {
  std::string name;
  bool pass = true;
  std::size_t failures = 0;
  std::vector<std::string> offenders{};  // first few offending cells, human readable
};

struct BalanceReport {
  std::vector<BalanceCheck> checks;
  bool pass() const;
  std::string summary() const;
};

BalanceReport validate_block(const Block& block, const DesignGeometry& geometry = {});

nlohmann::json to_json(const ParticipantDesign& d);
ParticipantDesign design_from_json(const nlohmann::json& j);

/// One ParticipantDesign per line.
void write_block_jsonl(std::ostream& out, const Block& block);
std::vector<Block> read_blocks_jsonl(std::istream& in);

}  // namespace influence
