#include <doctest.h>

#include <atomic>
#include <sstream>

#include "fixtures.hpp"
#include "influence/statement_bank.hpp"

using namespace influence;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> jsonl_lines(const fs::path& p) {
  std::istringstream in(testing::slurp(p));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

/// Returns garbage for every `period`-th query.
class FlakyBackend final : public CompletionBackend {
 public:
  FlakyBackend(std::shared_ptr<CompletionBackend> inner, std::size_t period) : inner_(std::move(inner)), period_(period) {}
  std::string name() const override { return "flaky"; }

 protected:
  std::string do_complete(const PromptText& prompt, const CompletionParams& params) override {
    const auto k = ++calls_;
    auto text = inner_->complete(prompt, params);
    return k % period_ == 0 ? "I'd rather not rate these." : text;
  }

 private:
  std::shared_ptr<CompletionBackend> inner_;
  std::size_t period_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace

TEST_CASE("ITE config round-trips through JSON") {
  IteConfig c;
  c.blocks = 3;
  c.seed = 99;
  c.backend.query_cap = 500;
  c.backend.temperature = 0.0;
  c.synthetic.offset = 0.26;
  c.synthetic.seed = 5;
  const auto j = to_json(c);
  CHECK(j.at("study") == "ite");
  CHECK(to_json(ite_config_from_json(j)) == j);
}

TEST_CASE("PFN config round-trips through JSON") {
  PfnConfig c;
  c.participants = 12;
  c.perturb_sd = 0.4;
  c.synthetic.persuasion.coefficients.e = 0.478;
  c.synthetic.mobilization.country_effects["Spain"] = -0.2;
  const auto j = to_json(c);
  CHECK(j.at("study") == "pfn");
  CHECK(to_json(pfn_config_from_json(j)) == j);
}

TEST_CASE("config readers reject unknown keys and bad values") {
  using nlohmann::json;
  CHECK_THROWS_AS(ite_config_from_json(json{{"blokcs", 2}}), ConfigError);
  CHECK_THROWS_AS(ite_config_from_json(json{{"backend", {{"temprature", 0.5}}}}), ConfigError);
  CHECK_THROWS_AS(ite_config_from_json(json{{"study", "pfn"}}), ConfigError);
  CHECK_THROWS_AS(pfn_config_from_json(json{{"study", "ite"}}), ConfigError);
  CHECK_THROWS_AS(ite_config_from_json(json{{"backend", {{"kind", "local"}}}}), ConfigError);
  CHECK_THROWS_AS(ite_config_from_json(json{{"backend", {{"temperature", 2.5}}}}), ConfigError);
  CHECK_THROWS_AS(ite_config_from_json(json{{"blocks", 0}}), ConfigError);
  CHECK_THROWS_AS(ite_config_from_json(json{{"blocks", "ten"}}), ConfigError);
  CHECK_THROWS_AS(ite_config_from_json(json{{"synthetic", {{"effect", "all"}}}}), ConfigError);
  CHECK_THROWS_AS(pfn_config_from_json(json{{"equal_target", 0.0}}), ConfigError);
  CHECK_THROWS_AS(pfn_config_from_json(json{{"synthetic", {{"persuasion", {{"coefficients", {{"x", 1}}}}}}}}),
                  ConfigError);
  CHECK(ite_config_from_json(json::object()).blocks == 10);
  CHECK(pfn_config_from_json(json::object()).participants == 2153);
}

TEST_CASE("config files may carry comments") {
  testing::TempDir dir;
  testing::spit(dir / "c.json", "// planted run\n{\n  \"study\": \"ite\", /* two blocks */ \"blocks\": 2\n}\n");
  CHECK(ite_config_from_json(load_config_json(dir / "c.json")).blocks == 2);
  testing::spit(dir / "bad.json", "{ \"blocks\": ");
  CHECK_THROWS_AS(load_config_json(dir / "bad.json"), ConfigError);
  CHECK_THROWS_AS(load_config_json(dir / "missing.json"), ConfigError);
}

TEST_CASE("shipped configs parse") {
  for (const auto& e : fs::directory_iterator(testing::data_dir() / "configs")) {
    CAPTURE(e.path());
    const auto j = load_config_json(e.path());
    if (j.at("study") == "ite")
      CHECK_NOTHROW(ite_config_from_json(j));
    else
      CHECK_NOTHROW(pfn_config_from_json(j));
  }
}

TEST_CASE("a one-block ITE run writes 100 participants of 64 ratings") {
  testing::TempDir dir;
  const auto s = run_ite(testing::null_ite_config(3), testing::run_options(dir.path()));
  CHECK(s.participants == 100);
  CHECK(s.resumed_from == 0);
  CHECK(s.queries == 200);
  CHECK(s.attempts == 100);
  const auto lines = jsonl_lines(s.data);
  CHECK(lines.size() == 1 + 100 * 65);
  const auto data = testing::read_ite(s.data);
  REQUIRE(data.participants.size() == 100);
  for (const auto& p : data.participants) {
    CHECK(p.exposure.size() == 32);
    CHECK(p.test.size() == 32);
  }
  CHECK(data.statement_ids.size() == 100);

  const auto manifest = nlohmann::json::parse(testing::slurp(s.manifest));
  CHECK(manifest.at("study") == "ite");
  CHECK(fs::path(manifest.at("data_dir").get<std::string>()).is_absolute());
  CHECK(manifest.at("config") == to_json(testing::null_ite_config(3)));

  SUBCASE("existing output needs resume") {
    CHECK_THROWS_AS(run_ite(testing::null_ite_config(3), testing::run_options(dir.path())), RunError);
  }
  SUBCASE("resume refuses a different configuration") {
    auto o = testing::run_options(dir.path());
    o.resume = true;
    CHECK_THROWS_AS(run_ite(testing::null_ite_config(4), o), RunError);
  }
  SUBCASE("resuming a finished run adds nothing") {
    auto o = testing::run_options(dir.path());
    o.resume = true;
    const auto before = testing::slurp(s.data);
    const auto again = run_ite(testing::null_ite_config(3), o);
    CHECK(again.resumed_from == 100);
    CHECK(again.queries == 0);
    CHECK(testing::slurp(s.data) == before);
  }
}

TEST_CASE("interrupted runs resume to the uninterrupted bytes") {
  testing::TempDir full, part;
  const auto cfg = testing::null_ite_config(11, 2);
  const auto ref = run_ite(cfg, testing::run_options(full.path()));
  const auto reference = testing::slurp(ref.data);
  const auto ref_lines = jsonl_lines(ref.data);

  auto o = testing::run_options(part.path());
  o.stop_after = 137;
  const auto first = run_ite(cfg, o);
  CHECK(first.participants == 137);
  const auto manifest = nlohmann::json::parse(testing::slurp(first.manifest));
  CHECK(manifest.at("status") == "partial");

  SUBCASE("torn final line") {
    std::ofstream(first.data, std::ios::app | std::ios::binary) << R"({"type":"participant","id":137,"blo)";
  }
  SUBCASE("partial participant group") {
    std::ofstream out(first.data, std::ios::app | std::ios::binary);
    const std::size_t start = 1 + 137 * 65;
    for (std::size_t k = start; k < start + 20; ++k) out << ref_lines[k] << '\n';
  }
  SUBCASE("clean stop") {}

  RunOptions r;
  r.log = [](const std::string&) {};
  const auto resumed = resume_run(part.path(), r);
  CHECK(resumed.resumed_from == 137);
  CHECK(resumed.participants == 200);
  CHECK(testing::slurp(resumed.data) == reference);
  CHECK(nlohmann::json::parse(testing::slurp(resumed.manifest)).at("status") == "complete");
}

TEST_CASE("a different input set counts as a different run") {
  testing::TempDir data, out;
  fs::copy(testing::data_dir(), data.path(), fs::copy_options::recursive);
  auto o = testing::run_options(out.path());
  o.data_dir = data.path();
  o.stop_after = 5;
  run_ite(testing::null_ite_config(2), o);
  auto bank = testing::slurp(data / "statements.txt");
  bank += "\n";
  testing::spit(data / "statements.txt", bank);
  o.resume = true;
  CHECK_THROWS_AS(run_ite(testing::null_ite_config(2), o), RunError);
}

TEST_CASE("rejected completions are retried and recorded") {
  testing::TempDir dir;
  auto cfg = testing::null_ite_config(6);
  cfg.backend.concurrency = 1;
  const auto bank = load_bank(testing::data_dir() / cfg.bank);
  auto flaky = std::make_shared<FlakyBackend>(make_ite_backend(cfg, bank), 7);
  const auto s = run_ite(cfg, testing::run_options(dir.path()), flaky);
  CHECK(s.participants == 100);
  CHECK(s.attempts > 100);
  std::size_t with_rejections = 0, attempts = 0;
  for (const auto& line : jsonl_lines(s.data)) {
    const auto j = nlohmann::json::parse(line);
    if (j.at("type") != "participant") continue;
    attempts += j.at("attempts").get<std::size_t>();
    if (!j.at("rejections").empty()) {
      ++with_rejections;
      CHECK(j.at("rejections").size() + 1 == j.at("attempts").get<std::size_t>());
      CHECK(j.at("rejections")[0].at("errors").get<std::string>().size() > 0);
    }
  }
  CHECK(with_rejections > 0);
  CHECK(attempts == s.attempts);

  SUBCASE("a backend that never complies stops the run") {
    testing::TempDir other;
    auto always = std::make_shared<FlakyBackend>(make_ite_backend(cfg, bank), 1);
    cfg.max_attempts = 3;
    CHECK_THROWS_AS(run_ite(cfg, testing::run_options(other.path()), always), RunError);
  }
}

TEST_CASE("the query cap surfaces as a backend error naming the participant") {
  testing::TempDir dir;
  auto cfg = testing::null_ite_config(6);
  cfg.backend.query_cap = 5;
  cfg.backend.concurrency = 1;
  try {
    run_ite(cfg, testing::run_options(dir.path()));
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::BudgetExceeded);
    CHECK(std::string(e.what()).find("participant 2") != std::string::npos);
  }
  // Completed participants are kept for a later resume.
  CHECK(testing::read_ite(dir / "data.jsonl").participants.size() == 2);
}

TEST_CASE("output does not depend on concurrency") {
  testing::TempDir a, b;
  auto cfg = testing::null_ite_config(21);
  cfg.backend.concurrency = 1;
  const auto one = run_ite(cfg, testing::run_options(a.path()));
  cfg.backend.concurrency = 4;
  auto o = testing::run_options(b.path());
  const auto four = run_ite(cfg, o);
  // The config (and so the header) records the concurrency; compare the rest.
  auto x = jsonl_lines(one.data), y = jsonl_lines(four.data);
  REQUIRE(x.size() == y.size());
  x.erase(x.begin());
  y.erase(y.begin());
  CHECK(x == y);
}

TEST_CASE("PFN runs assign articles evenly and record profiles") {
  testing::TempDir dir;
  auto cfg = testing::zero_pfn_config(5, 4000);
  const auto s = run_pfn(cfg, testing::run_options(dir.path()));
  CHECK(s.participants == 4000);
  const auto data = testing::read_pfn(s.data);
  REQUIRE(data.participants.size() == 4000);
  CHECK(data.probe_kinds.size() == 5);
  std::array<int, 4> counts{};
  for (const auto& p : data.participants) {
    ++counts[static_cast<std::size_t>(p.article)];
    CHECK(p.ratings.size() == 5);
    CHECK(!p.profile.country.empty());
  }
  for (int c : counts) CHECK(std::abs(c / 4000.0 - 0.25) <= 0.025);
  const auto header = nlohmann::json::parse(jsonl_lines(s.data).front());
  CHECK(header.at("perturb_sd").get<double>() > 0);
}

TEST_CASE("a flat noiseless PFN generator gives constant scores") {
  testing::TempDir dir;
  auto cfg = testing::zero_pfn_config(5, 50);
  cfg.synthetic.noise_sd = 0.0;
  const auto s = run_pfn(cfg, testing::run_options(dir.path()));
  const auto t = describe_scores(score_dataset(testing::read_pfn(s.data)));
  CHECK(t.persuasion.mean == 4.0);
  CHECK(t.persuasion.sd == 0.0);
  CHECK(t.mobilization.mean == 4.0);
  CHECK(t.persuasion.n == 50);
}

TEST_CASE("dataset readers reject incomplete data") {
  const auto lines = jsonl_lines(testing::shared_null_run());
  std::string text;
  for (std::size_t k = 0; k < 1 + 65 + 10; ++k) text += lines[k] + "\n";
  std::istringstream in(text);
  CHECK_THROWS_AS(read_ite_dataset(in), DataError);
  std::istringstream empty("");
  CHECK_THROWS_AS(read_ite_dataset(empty), DataError);
  std::istringstream wrong(lines[0] + "\n");
  CHECK_THROWS_AS(read_pfn_dataset(wrong), DataError);
  std::istringstream junk(lines[0] + "\n{\"type\":\"sandwich\"}\n");
  CHECK_THROWS_AS(read_ite_dataset(junk), DataError);
  CHECK(detect_study(testing::shared_null_run()) == "ite");
}

TEST_CASE("rating records round-trip through JSON") {
  const RatingRecord r{7, Phase::ite_test, "s017", Attribute::interest, 2, 6, "\"text\" | I2: Rather uninteresting"};
  const auto j = to_json(r);
  CHECK(j.at("type") == "rating");
  CHECK(rating_from_json(j) == r);
  const RatingRecord q{3, Phase::pfn_probe, "m2", std::nullopt, 6, 7, "6"};
  CHECK(rating_from_json(to_json(q)) == q);
}
