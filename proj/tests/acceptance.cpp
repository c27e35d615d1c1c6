// Acceptance checks for the synthetic pipeline. Prints one PASS/FAIL line per
// criterion and exits nonzero if any fails.

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "influence/parser.hpp"
#include "influence/prompt.hpp"
#include "influence/report.hpp"
#include "influence/statement_bank.hpp"
#include "ols_oracle.hpp"

using namespace influence;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int decimals = 3) { return fixed(v, decimals); }

RunOptions quiet(const fs::path& out) {
  auto o = testing::run_options(out);
  o.log = [](const std::string&) {};
  return o;
}

// 1. Design balance over ten seeds, counted independently of validate_block.
Verdict design_balance() {
  const auto t0 = Clock::now();
  const auto bank = load_bank(testing::data_dir() / "statements.txt");
  bool ok = true;
  std::string first_problem;
  auto fail = [&](const std::string& what) {
    if (ok) first_problem = what;
    ok = false;
  };
  for (std::uint64_t seed = 101; seed <= 110; ++seed) {
    const auto block = build_block(bank, 0, seed);
    if (!validate_block(block).pass()) fail("validator rejects seed " + std::to_string(seed));
    std::map<std::tuple<std::string, Attribute, Attribute>, int> both;
    std::map<std::pair<std::string, Attribute>, int> fresh, expo_only;
    for (const auto& d : block.designs) {
      std::array<int, 3> roles{};
      for (const auto& [id, cell] : d.cell_roles) {
        ++roles[static_cast<std::size_t>(cell.role)];
        if (cell.role == Role::both) ++both[{id, *cell.exposure_attr, *cell.test_attr}];
        if (cell.role == Role::test_only) ++fresh[{id, *cell.test_attr}];
        if (cell.role == Role::exposure_only) ++expo_only[{id, *cell.exposure_attr}];
      }
      if (roles != std::array<int, 3>{16, 16, 16}) fail("role split of participant " + std::to_string(d.participant_id));
      if (d.exposure_items.size() != 32 || d.test_items.size() != 32)
        fail("item counts of participant " + std::to_string(d.participant_id));
      for (const auto& it : d.exposure_items) {
        const auto& c = d.cell_roles.at(it.statement_id);
        if (c.role == Role::test_only || c.exposure_attr != it.attribute) fail("exposure item disagrees with role");
      }
      for (const auto& it : d.test_items) {
        const auto& c = d.cell_roles.at(it.statement_id);
        if (c.role == Role::exposure_only || c.test_attr != it.attribute) fail("test item disagrees with role");
      }
    }
    for (const auto& s : bank.statements())
      for (Attribute t : kAttributes) {
        if (fresh[{s.id, t}] != 4) fail(s.id + " fresh count");
        for (Attribute e : kAttributes)
          if (both[{s.id, e, t}] != 1) fail(s.id + " pair count");
      }
  }
  const double secs = seconds_since(t0);
  if (secs >= 10) fail("runtime");
  return {ok, "10 seeds, " + fmt(secs, 2) + " s" + (ok ? "" : "; " + first_problem)};
}

// 2. Planted mixed-truth effect recovered; every other cell insignificant.
Verdict planted_recovery() {
  const auto t0 = Clock::now();
  testing::TempDir dir;
  const auto cfg = ite_config_from_json(load_config_json(testing::data_dir() / "configs" / "ite_planted.json"));
  const auto run = run_ite(cfg, quiet(dir.path()));
  const IteTable table(testing::read_ite(run.data));
  stats::BootstrapOptions bo;
  bo.n_resamples = 2000;
  const auto fx = analyze_exposure_effects(table, bo);
  const double secs = seconds_since(t0);

  const auto& truth = fx.mixed[static_cast<std::size_t>(Attribute::truth)];
  bool ok = truth.ci_offset.p < 0.05 && truth.ci_tilt.p < 0.05 && std::abs(truth.offset - 0.26) <= 0.05 &&
            std::abs(truth.tilt + 0.15) <= 0.05;
  int other_significant = 0;
  for (std::size_t a = 0; a < kNumAttributes; ++a) {
    for (const auto* f : {&fx.mixed[a], &fx.same[a]}) {
      if (f == &truth) continue;
      other_significant += (f->ci_offset.p < 0.05) + (f->ci_tilt.p < 0.05);
    }
  }
  ok = ok && other_significant == 0 && secs < 300;
  return {ok, "offset " + fmt(truth.offset) + " (p " + fmt(truth.ci_offset.p, 4) + "), tilt " + fmt(truth.tilt) +
                  " (p " + fmt(truth.ci_tilt.p, 4) + "), other significant cells " +
                  std::to_string(other_significant) + ", " + fmt(secs, 1) + " s"};
}

// 3. Null runs: corrected significance in at most one of twenty.
Verdict false_positive_control() {
  const auto t0 = Clock::now();
  int runs_with_hits = 0, cells = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    testing::TempDir dir;
    const auto run = run_ite(testing::null_ite_config(500 + k, 10), quiet(dir.path()));
    stats::BootstrapOptions bo;
    bo.n_resamples = 2000;
    bo.seed = 900 + k;
    const auto hits = count_significant(analyze_exposure_effects(IteTable(testing::read_ite(run.data)), bo));
    cells += static_cast<int>(hits);
    runs_with_hits += hits > 0;
  }
  return {runs_with_hits <= 1, std::to_string(runs_with_hits) + " of 20 runs with significant cells (" +
                                   std::to_string(cells) + " cells), " + fmt(seconds_since(t0), 1) + " s"};
}

// 4. Clustered OLS against the brute-force sandwich.
Verdict ols_oracle() {
  Eigen::MatrixXd X(6, 3);
  X << 1, 1, 0, 1, 2, 1, 1, 3, 0, 1, 4, 1, 1, 5, 1, 1, 6, 0;
  Eigen::VectorXd y(6);
  y << 1.3, 2.9, 3.1, 5.2, 4.8, 7.4;
  const std::vector<std::string> clusters{"A", "A", "A", "B", "B", "B"};
  const auto fit = stats::ols_cluster_robust(X, y, clusters);
  testing::Matrix rows(6, std::vector<double>(3));
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 3; ++j) rows[i][j] = X(i, j);
  const auto oracle = testing::brute_force_cluster_ols(rows, {1.3, 2.9, 3.1, 5.2, 4.8, 7.4}, {0, 0, 0, 1, 1, 1});
  double worst = 0;
  for (int j = 0; j < 3; ++j)
    worst = std::max({worst, std::abs(fit.beta(j) - oracle.beta[j]), std::abs(fit.se(j) - oracle.se[j])});
  std::ostringstream os;
  os << "max abs difference " << worst;
  return {worst <= 1e-10, os.str()};
}

// 5. Planted Table 7 coefficients recovered by the regression battery.
Verdict pfn_recovery() {
  struct Planted {
    double coef;
    bool significant;
  };
  const std::map<std::pair<std::string, std::string>, Planted> planted{
      {{"H1a", "E"}, {0.478, true}},     {{"H1b", "I"}, {-0.927, true}},  {{"H1c", "ExI"}, {0.541, true}},
      {{"H2a", "E"}, {0.463, true}},     {{"H2b", "I"}, {-1.090, true}},  {{"H2c", "ExI"}, {0.324, true}},
      {{"", "D/P"}, {0.149, true}},      {{"", "D/M"}, {0.125, true}},    {{"H3a", "DxE"}, {0.048, false}},
      {{"H3b", "DxI"}, {-0.029, false}}, {{"H3c", "DxExI"}, {0.092, false}}, {{"H4a", "DxE"}, {0.000, false}},
      {{"H4b", "DxI"}, {-0.025, false}}, {{"H4c", "DxExI"}, {0.096, false}}};

  const auto t0 = Clock::now();
  testing::TempDir dir;
  const auto cfg = pfn_config_from_json(load_config_json(testing::data_dir() / "configs" / "pfn_table7.json"));
  const auto run = run_pfn(cfg, quiet(dir.path()));
  const auto battery = run_table7_battery(score_dataset(testing::read_pfn(run.data)));
  const double secs = seconds_since(t0);

  int within = 0, pattern = 0;
  std::string misses;
  for (const auto& e : battery.entries) {
    std::string regressor = e.row.regressor;
    if (e.row.hypothesis.empty()) regressor += e.row.outcome == influence::Outcome::persuasion ? "/P" : "/M";
    const auto& want = planted.at({e.row.hypothesis, regressor});
    const bool close = std::abs(e.coef - want.coef) <= 2 * e.se;
    const bool sig = e.p < 0.05;
    const bool sign_ok = !want.significant || (e.coef > 0) == (want.coef > 0);
    const bool pattern_ok = sig == want.significant && sign_ok;
    within += close;
    pattern += pattern_ok;
    if (!close || !pattern_ok) {
      const std::string label = e.row.hypothesis.empty() ? regressor : e.row.hypothesis;
      misses += " " + label + "(" + (e.coef >= 0 ? "+" : "") + fmt(e.coef) + stars(e.p) + " vs " +
                (want.coef >= 0 ? "+" : "") + fmt(want.coef) + ")";
    }
  }
  const bool ok = within == 14 && pattern == 14 && secs < 120;
  return {ok, std::to_string(within) + "/14 within 2 SE, " + std::to_string(pattern) + "/14 sign/significance, " +
                  fmt(secs, 1) + " s" + (misses.empty() ? "" : ";" + misses)};
}

// 6. Deprivation perturbation calibrated to half the triples agreeing.
Verdict calibration() {
  const auto r = calibrate_perturbation(4.30, 1.61, 0.5);
  const double p = prob_all_equal(4.30, 1.61, r.perturb_sd, 100'000, 0xACCE97);
  const double mean_d = mean_deprivation_score(4.30, 1.61, r.perturb_sd, 100'000, 0xACCE98);
  const bool ok = p >= 0.48 && p <= 0.52 && std::abs(mean_d - 4.30) <= 0.05;
  return {ok, "perturb_sd " + fmt(r.perturb_sd, 4) + ", P(all equal) " + fmt(p, 4) + ", mean D " + fmt(mean_d, 4)};
}

// 7. Single-character corruptions of valid completions are always rejected.
Verdict parser_fuzz() {
  const auto bank = load_bank(testing::data_dir() / "statements.txt");
  const PromptBuilder builder(bank, load_templates(testing::data_dir() / "templates"));
  SyntheticIteBackend backend(bank, SyntheticIteConfig::random_means(bank, 77), 78);
  CompletionParams params;

  struct Sample {
    PromptText prompt;
    std::string completion;
  };
  std::vector<Sample> samples;
  int false_rejections = 0;
  for (std::uint32_t b = 0; samples.size() < 1000; ++b) {
    for (const auto& d : build_block(bank, b, 4242).designs) {
      if (samples.size() >= 1000) break;
      params.seed = d.participant_id;
      auto exposure = builder.exposure_prompt(d);
      auto text = backend.complete(exposure, params);
      const auto parsed = parse_ite_completion(text, exposure, d.participant_id);
      if (!parsed.ok()) {
        ++false_rejections;
        continue;
      }
      samples.push_back({exposure, text});
      auto test = builder.test_prompt(d, parsed.records);
      auto test_text = backend.complete(test, params);
      false_rejections += !parse_ite_completion(test_text, test, d.participant_id).ok();
      samples.push_back({test, test_text});
    }
  }

  // Positions inside the echoed statement or the rating code.
  auto targets = [](const std::string& c) {
    std::vector<std::size_t> pos;
    std::size_t start = 0;
    while (start < c.size()) {
      auto end = c.find('\n', start);
      if (end == std::string::npos) end = c.size();
      const auto line = std::string_view(c).substr(start, end - start);
      const auto sep = line.rfind("\" | ");
      const auto open = line.find('"');
      if (sep != std::string_view::npos && open != std::string_view::npos && open < sep) {
        for (auto k = open + 1; k < sep; ++k)
          if (static_cast<unsigned char>(line[k]) < 0x80) pos.push_back(start + k);
        pos.push_back(start + sep + 4);  // attribute code
        pos.push_back(start + sep + 5);  // rating digit
      }
      start = end + 1;
    }
    return pos;
  };

  Rng rng(0xF022);
  std::uniform_int_distribution<int> printable('!', '~');
  int undetected = 0;
  std::string example;
  const int trials = 10'000;
  for (int k = 0; k < trials; ++k) {
    const auto& s = samples[static_cast<std::size_t>(k) % samples.size()];
    const auto pos = targets(s.completion);
    const auto at = pos[std::uniform_int_distribution<std::size_t>(0, pos.size() - 1)(rng)];
    std::string corrupt = s.completion;
    char c;
    do c = static_cast<char>(printable(rng));
    while (c == corrupt[at]);
    corrupt[at] = c;
    if (parse_ite_completion(corrupt, s.prompt, 0).ok()) {
      if (!undetected) example = corrupt.substr(corrupt.rfind('\n', at) + 1, 80);
      ++undetected;
    }
  }
  const bool ok = undetected == 0 && false_rejections == 0;
  return {ok, std::to_string(trials - undetected) + "/" + std::to_string(trials) + " corruptions detected, " +
                  std::to_string(false_rejections) + " false rejections on " + std::to_string(samples.size()) +
                  " clean completions" + (example.empty() ? "" : "; missed: " + example)};
}

// 8. Two CLI runs with the same config give identical data and reports.
Verdict reproducibility() {
  testing::TempDir dir;
  const auto config = testing::data_dir() / "configs" / "ite_planted.json";
  auto run = [&](const std::string& name) {
    const auto out = dir / name;
    const std::string cmd = std::string("\"") + INFLUENCE_CLI + "\" run-ite --config \"" + config.string() +
                            "\" --seed 8 --out \"" + out.string() + "\" >/dev/null 2>&1 && \"" + INFLUENCE_CLI +
                            "\" analyze --data \"" + (out / "data.jsonl").string() +
                            "\" --resamples 500 >/dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) throw std::runtime_error("CLI run failed: " + cmd);
    return out;
  };
  const auto a = run("a"), b = run("b");
  std::size_t compared = 1;
  bool same = testing::slurp(a / "data.jsonl") == testing::slurp(b / "data.jsonl");
  for (const auto& e : fs::directory_iterator(a / "reports")) {
    ++compared;
    const auto other = b / "reports" / e.path().filename();
    same = same && fs::exists(other) && testing::slurp(e.path()) == testing::slurp(other);
  }
  same = same && compared == 1 + static_cast<std::size_t>(std::distance(fs::directory_iterator(b / "reports"),
                                                                          fs::directory_iterator{}));
  return {same && compared > 1, std::to_string(compared) + " files compared"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"design balance", design_balance},
      {"planted ITE recovery", planted_recovery},
      {"false-positive control", false_positive_control},
      {"clustered OLS oracle", ols_oracle},
      {"PFN battery recovery", pfn_recovery},
      {"deprivation calibration", calibration},
      {"parser robustness", parser_fuzz},
      {"reproducibility", reproducibility},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Verdict o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k + 1 << " (" << criteria[k].first << "): " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
