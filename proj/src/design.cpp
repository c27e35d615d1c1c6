#include "influence/design.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace influence {

namespace {

constexpr std::uint64_t kSquareStream = 0x5155415245ULL;  // "SQUARE"
constexpr std::uint64_t kOrderStream = 0x4f52444552ULL;   // "ORDER"
constexpr std::size_t kMaxOffenders = 12;

std::vector<std::uint32_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::uint32_t> p(n);
  std::iota(p.begin(), p.end(), 0u);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

std::string pair_name(Attribute e, Attribute t) {
  return std::string(attribute_name(e)) + "->" + std::string(attribute_name(t));
}

void note(BalanceCheck& c, std::string what) {
  c.pass = false;
  ++c.failures;
  if (c.offenders.size() < kMaxOffenders) c.offenders.push_back(std::move(what));
}

}  // namespace

bool LatinSquare::is_latin() const {
  if (cells.size() != n * n) return false;
  std::vector<std::uint8_t> seen(n);
  for (std::size_t r = 0; r < n; ++r) {
    std::fill(seen.begin(), seen.end(), 0);
    for (std::size_t c = 0; c < n; ++c) {
      const auto v = (*this)(r, c);
      if (v >= n || seen[v]++) return false;
    }
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::fill(seen.begin(), seen.end(), 0);
    for (std::size_t r = 0; r < n; ++r)
      if (seen[(*this)(r, c)]++) return false;
  }
  return true;
}

LatinSquare random_latin_square(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("latin square order must be >= 1");
  Rng rng(seed);
  const auto rows = random_permutation(n, rng);
  const auto cols = random_permutation(n, rng);
  const auto symbols = random_permutation(n, rng);
  LatinSquare sq{n, std::vector<std::uint32_t>(n * n)};
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      sq.cells[r * n + c] = symbols[(rows[r] + cols[c]) % n];
  return sq;
}

void DesignGeometry::check() const {
  if (attributes == 0 || attributes > kNumAttributes)
    throw std::invalid_argument("geometry: attributes must be in 1..4");
  if (symbols_used() > n)
    throw std::invalid_argument("geometry: block of " + std::to_string(n) + " cannot hold " +
                                std::to_string(symbols_used()) + " roles per participant");
}

Block build_block(const StatementBank& bank, std::uint32_t block_id, std::uint64_t seed,
                  const DesignGeometry& geometry) {
  geometry.check();
  if (bank.size() != geometry.n)
    throw std::invalid_argument("build_block: bank has " + std::to_string(bank.size()) +
                                " statements, design needs exactly " + std::to_string(geometry.n));
  const std::size_t n = geometry.n;
  const std::size_t a = geometry.attributes;
  const std::size_t both = geometry.both_count();
  const std::size_t exp_end = both + a * geometry.exposure_only_per_attr;
  const std::size_t test_end = exp_end + a * geometry.test_only_per_attr;

  // Rows are participants, columns statements. The symbol in a cell fixes the
  // statement's role for that participant, so row/column permutation property
  // gives the per-participant and per-statement balance.
  const LatinSquare square = random_latin_square(n, derive_seed(seed, block_id, kSquareStream));

  Block block;
  block.block_id = block_id;
  block.designs.reserve(n);
  for (std::size_t row = 0; row < n; ++row) {
    ParticipantDesign d;
    d.block_id = block_id;
    d.participant_id = static_cast<std::uint32_t>(block_id * n + row);
    for (std::size_t col = 0; col < n; ++col) {
      const std::size_t k = square(row, col);
      const std::string& id = bank[col].id;
      if (k < both) {
        const Attribute e = kAttributes[k / a];
        const Attribute t = kAttributes[k % a];
        d.exposure_items.push_back({id, e});
        d.test_items.push_back({id, t});
        d.cell_roles.emplace(id, CellRole{Role::both, e, t});
      } else if (k < exp_end) {
        const Attribute e = kAttributes[(k - both) % a];
        d.exposure_items.push_back({id, e});
        d.cell_roles.emplace(id, CellRole{Role::exposure_only, e, std::nullopt});
      } else if (k < test_end) {
        const Attribute t = kAttributes[(k - exp_end) % a];
        d.test_items.push_back({id, t});
        d.cell_roles.emplace(id, CellRole{Role::test_only, std::nullopt, t});
      }
    }
    Rng order(derive_seed(seed, d.participant_id, kOrderStream));
    std::shuffle(d.exposure_items.begin(), d.exposure_items.end(), order);
    std::shuffle(d.test_items.begin(), d.test_items.end(), order);
    block.designs.push_back(std::move(d));
  }
  return block;
}

bool BalanceReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

std::string BalanceReport::summary() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.pass ? "PASS " : "FAIL ") << c.name;
    if (!c.pass) {
      os << " (" << c.failures << " failures)";
      for (const auto& o : c.offenders) os << "\n    " << o;
    }
    os << '\n';
  }
  return os.str();
}

BalanceReport validate_block(const Block& block, const DesignGeometry& geometry) {
  geometry.check();
  const std::size_t a = geometry.attributes;
  BalanceCheck size{.name = "block has one design per statement slot"};
  BalanceCheck lengths{.name = "phase lengths per participant"};
  BalanceCheck duplicates{.name = "no statement repeated within a phase"};
  BalanceCheck attrs{.name = "attributes within geometry"};
  BalanceCheck participant_split{.name = "per-participant exposure-only/test-only/both split"};
  BalanceCheck roles{.name = "cell_roles agree with item lists"};
  BalanceCheck statement_cells{.name = "per-statement exposure x test cell counts"};
  BalanceCheck statement_fresh{.name = "per-statement fresh test counts per attribute"};
  BalanceCheck statement_phase{.name = "per-statement phase appearance counts"};
  BalanceCheck statement_count{.name = "statement count matches geometry"};

  if (block.designs.size() != geometry.n)
    note(size, "expected " + std::to_string(geometry.n) + " designs, got " +
                   std::to_string(block.designs.size()));

  struct Tally {
    std::vector<std::size_t> cell = std::vector<std::size_t>(kNumAttributes * kNumAttributes);
    std::vector<std::size_t> fresh = std::vector<std::size_t>(kNumAttributes);
    std::size_t exposure = 0;
    std::size_t test = 0;
  };
  std::map<std::string, Tally> per_statement;

  for (const auto& d : block.designs) {
    const std::string who = "participant " + std::to_string(d.participant_id);
    if (d.exposure_items.size() != geometry.exposure_length() ||
        d.test_items.size() != geometry.test_length())
      note(lengths, who + ": exposure " + std::to_string(d.exposure_items.size()) + ", test " +
                        std::to_string(d.test_items.size()));

    std::map<std::string, Attribute> exposed, tested;
    for (const auto& it : d.exposure_items) {
      if (index(it.attribute) >= a) note(attrs, who + ": " + it.statement_id);
      if (!exposed.emplace(it.statement_id, it.attribute).second)
        note(duplicates, who + ": " + it.statement_id + " twice in exposure");
    }
    for (const auto& it : d.test_items) {
      if (index(it.attribute) >= a) note(attrs, who + ": " + it.statement_id);
      if (!tested.emplace(it.statement_id, it.attribute).second)
        note(duplicates, who + ": " + it.statement_id + " twice in test");
    }

    std::vector<std::size_t> both_cells(kNumAttributes * kNumAttributes), exp_only(kNumAttributes),
        test_only(kNumAttributes);
    std::map<std::string, CellRole> derived;
    for (const auto& [id, e] : exposed) {
      auto& tally = per_statement[id];
      ++tally.exposure;
      if (auto t = tested.find(id); t != tested.end()) {
        ++both_cells[index(e) * kNumAttributes + index(t->second)];
        ++tally.cell[index(e) * kNumAttributes + index(t->second)];
        derived.emplace(id, CellRole{Role::both, e, t->second});
      } else {
        ++exp_only[index(e)];
        derived.emplace(id, CellRole{Role::exposure_only, e, std::nullopt});
      }
    }
    for (const auto& [id, t] : tested) {
      auto& tally = per_statement[id];
      ++tally.test;
      if (!exposed.count(id)) {
        ++test_only[index(t)];
        ++tally.fresh[index(t)];
        derived.emplace(id, CellRole{Role::test_only, std::nullopt, t});
      }
    }
    if (derived != d.cell_roles) note(roles, who);

    for (std::size_t e = 0; e < a; ++e) {
      for (std::size_t t = 0; t < a; ++t)
        if (both_cells[e * kNumAttributes + t] != 1)
          note(participant_split, who + ": both " + pair_name(kAttributes[e], kAttributes[t]) +
                                      " x" + std::to_string(both_cells[e * kNumAttributes + t]));
      if (exp_only[e] != geometry.exposure_only_per_attr)
        note(participant_split, who + ": exposure-only " +
                                    std::string(attribute_name(kAttributes[e])) + " x" +
                                    std::to_string(exp_only[e]));
      if (test_only[e] != geometry.test_only_per_attr)
        note(participant_split, who + ": test-only " + std::string(attribute_name(kAttributes[e])) +
                                    " x" + std::to_string(test_only[e]));
    }
  }

  if (per_statement.size() != geometry.n)
    note(statement_count, std::to_string(per_statement.size()) + " distinct statements, expected " +
                              std::to_string(geometry.n));
  const std::size_t phase_count = geometry.both_count() + a * geometry.exposure_only_per_attr;
  const std::size_t test_count = geometry.both_count() + a * geometry.test_only_per_attr;
  for (const auto& [id, tally] : per_statement) {
    for (std::size_t e = 0; e < a; ++e)
      for (std::size_t t = 0; t < a; ++t)
        if (tally.cell[e * kNumAttributes + t] != 1)
          note(statement_cells, "statement " + id + " cell (" +
                                    pair_name(kAttributes[e], kAttributes[t]) + ") count " +
                                    std::to_string(tally.cell[e * kNumAttributes + t]));
    for (std::size_t t = 0; t < a; ++t)
      if (tally.fresh[t] != geometry.test_only_per_attr)
        note(statement_fresh, "statement " + id + " cell (fresh->" +
                                  std::string(attribute_name(kAttributes[t])) + ") count " +
                                  std::to_string(tally.fresh[t]));
    if (tally.exposure != phase_count || tally.test != test_count)
      note(statement_phase, "statement " + id + ": exposure " + std::to_string(tally.exposure) +
                                ", test " + std::to_string(tally.test));
  }

  BalanceReport report;
  report.checks = {size,  lengths,         duplicates,      attrs,           participant_split,
                   roles, statement_count, statement_cells, statement_fresh, statement_phase};
  return report;
}

namespace {

std::string_view role_name(Role r) {
  switch (r) {
    case Role::exposure_only: return "exposure_only";
    case Role::test_only: return "test_only";
    case Role::both: return "both";
  }
  return "?";
}

Attribute attr_from_json(const nlohmann::json& j) {
  const auto a = attribute_from_name(j.get<std::string>());
  if (!a) throw std::invalid_argument("unknown attribute " + j.dump());
  return *a;
}

nlohmann::json items_json(const std::vector<DesignItem>& items) {
  auto arr = nlohmann::json::array();
  for (const auto& it : items) arr.push_back({it.statement_id, attribute_name(it.attribute)});
  return arr;
}

std::vector<DesignItem> items_from_json(const nlohmann::json& j) {
  std::vector<DesignItem> out;
  for (const auto& it : j) out.push_back({it.at(0).get<std::string>(), attr_from_json(it.at(1))});
  return out;
}

}  // namespace

nlohmann::json to_json(const ParticipantDesign& d) {
  nlohmann::json roles = nlohmann::json::object();
  for (const auto& [id, r] : d.cell_roles) {
    nlohmann::json rj{{"role", role_name(r.role)}};
    if (r.exposure_attr) rj["exposure"] = attribute_name(*r.exposure_attr);
    if (r.test_attr) rj["test"] = attribute_name(*r.test_attr);
    roles[id] = std::move(rj);
  }
  return {{"participant", d.participant_id},
          {"block", d.block_id},
          {"exposure", items_json(d.exposure_items)},
          {"test", items_json(d.test_items)},
          {"roles", std::move(roles)}};
}

ParticipantDesign design_from_json(const nlohmann::json& j) {
  ParticipantDesign d;
  d.participant_id = j.at("participant").get<std::uint32_t>();
  d.block_id = j.at("block").get<std::uint32_t>();
  d.exposure_items = items_from_json(j.at("exposure"));
  d.test_items = items_from_json(j.at("test"));
  for (const auto& [id, rj] : j.at("roles").items()) {
    CellRole r{};
    const auto name = rj.at("role").get<std::string>();
    if (name == "both") r.role = Role::both;
    else if (name == "exposure_only") r.role = Role::exposure_only;
    else if (name == "test_only") r.role = Role::test_only;
    else throw std::invalid_argument("unknown role " + name);
    if (rj.contains("exposure")) r.exposure_attr = attr_from_json(rj["exposure"]);
    if (rj.contains("test")) r.test_attr = attr_from_json(rj["test"]);
    d.cell_roles.emplace(id, r);
  }
  return d;
}

void write_block_jsonl(std::ostream& out, const Block& block) {
  for (const auto& d : block.designs) out << to_json(d).dump() << '\n';
}

std::vector<Block> read_blocks_jsonl(std::istream& in) {
  std::vector<Block> blocks;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto d = design_from_json(nlohmann::json::parse(line));
    if (blocks.empty() || blocks.back().block_id != d.block_id) {
      blocks.push_back(Block{d.block_id, {}});
    }
    blocks.back().designs.push_back(std::move(d));
  }
  return blocks;
}

}  // namespace influence
