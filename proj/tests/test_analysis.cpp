#include <doctest.h>

#include <map>

#include "fixtures.hpp"
#include "influence/ite_analysis.hpp"
#include "influence/pfn_analysis.hpp"

using namespace influence;

TEST_CASE("test ratings are classified by the exposure attribute in the records") {
  const auto data = testing::read_ite(testing::shared_null_run());
  REQUIRE(data.participants.size() == 100);
  const IteTable table(data);
  CHECK(table.participants() == 100);
  CHECK(table.statements() == 100);
  CHECK(table.test().size() == 3200);
  CHECK(table.exposure().size() == 3200);

  // One block: per statement and test attribute, 4 fresh, 1 same, 3 mixed.
  std::map<std::tuple<std::uint32_t, Attribute, Condition>, int> counts;
  for (const auto& o : table.test()) ++counts[{o.statement, o.test_attr, o.condition}];
  for (std::uint32_t s = 0; s < 100; ++s)
    for (Attribute a : kAttributes) {
      CHECK(counts[{s, a, Condition::fresh}] == 4);
      CHECK(counts[{s, a, Condition::same}] == 1);
      CHECK(counts[{s, a, Condition::mixed}] == 3);
    }
  for (const auto& o : table.test()) {
    if (o.condition == Condition::fresh) CHECK_FALSE(o.exposure_attr);
    if (o.condition == Condition::same) CHECK(o.exposure_attr == o.test_attr);
    if (o.condition == Condition::mixed) CHECK(o.exposure_attr != o.test_attr);
  }
}

TEST_CASE("exposure pairs pool the exposed condition per statement") {
  const IteTable table(testing::read_ite(testing::shared_null_run()));
  const auto mixed = exposure_pairs(table, Attribute::truth, Condition::mixed);
  const auto same = exposure_pairs(table, Attribute::truth, Condition::same);
  CHECK(mixed.size() == 100);
  CHECK(same.size() == 100);
  for (const auto& p : mixed) {
    CHECK(p.n_fresh == 4);
    CHECK(p.n_exposed == 3);
  }
  for (const auto& p : same) CHECK(p.n_exposed == 1);
  CHECK_THROWS_AS(exposure_pairs(table, Attribute::truth, Condition::fresh), std::invalid_argument);

  // Independent recomputation of one statement's means.
  const std::uint32_t s = 17;
  double fresh = 0, exposed = 0;
  int nf = 0, ne = 0;
  for (const auto& o : table.test()) {
    if (o.statement != s || o.test_attr != Attribute::truth) continue;
    if (o.condition == Condition::fresh) fresh += o.value, ++nf;
    if (o.condition == Condition::mixed) exposed += o.value, ++ne;
  }
  const auto& p = *std::find_if(mixed.begin(), mixed.end(),
                                [&](const auto& x) { return x.statement_id == table.statement_ids()[s]; });
  CHECK(p.r == doctest::Approx(fresh / nf));
  CHECK(p.r_prime == doctest::Approx(exposed / ne));
}

TEST_CASE("null runs: offsets stay insignificant, tilt carries the regression-to-the-mean bias") {
  // The fresh mean r appears on both sides of r' - r = offset + tilt (r - 3.5),
  // so its sampling noise biases the tilt by about -var(noise of r) / var(r).
  // With one block (4 fresh ratings per statement) that is roughly -0.09.
  const IteTable table(testing::read_ite(testing::shared_null_run()));
  stats::BootstrapOptions o;
  o.n_resamples = 2000;
  const auto fx = analyze_exposure_effects(table, o);
  CHECK(fx.corrected_level == doctest::Approx(0.996875));
  CHECK(fx.resamples_used + fx.resamples_dropped == 2000);
  double tilt_sum = 0;
  for (const auto* fits : {&fx.mixed, &fx.same})
    for (const auto& f : *fits) {
      CHECK(f.statements == 100);
      CHECK(f.ci_offset.p >= 0.05);
      CHECK(f.ci_offset.lo <= f.offset);
      CHECK(f.offset <= f.ci_offset.hi);
      tilt_sum += f.tilt;
    }
  CHECK(tilt_sum / 8 < -0.03);
  CHECK(tilt_sum / 8 > -0.2);

  SUBCASE("ten blocks shrink the bias below the corrected intervals") {
    testing::TempDir dir;
    auto options = testing::run_options(dir.path());
    const auto run = run_ite(testing::null_ite_config(32, 10), options);
    const auto big = analyze_exposure_effects(IteTable(testing::read_ite(run.data)), o);
    CHECK(count_significant(big) == 0);
    for (const auto* fits : {&big.mixed, &big.same})
      for (const auto& f : *fits) CHECK(std::abs(f.tilt) < 0.05);
  }
}

TEST_CASE("exposure-phase means") {
  const IteTable table(testing::read_ite(testing::shared_null_run()));
  const auto means = exposure_phase_means(table, Attribute::sentiment);
  CHECK(means.size() == 100);
  for (const auto& m : means) {
    CHECK(m.ci.n == 8);  // 4 both-phase plus 4 exposure-only per attribute
    CHECK((m.ci.mean >= 1 && m.ci.mean <= 6));
  }
  const auto with_ci = exposure_means_with_ci(table, Attribute::truth, Condition::mixed);
  CHECK(with_ci.size() == 100);
}

TEST_CASE("participant scores") {
  PfnParticipant p;
  p.profile.country = "Denmark";
  p.article = ArticleKind::anti_immigrant;
  p.deprivation = DeprivationTriple{{4, 4, 5}};
  const std::map<std::string, ProbeKind> kinds{{"p1", ProbeKind::persuasion},
                                               {"p2", ProbeKind::persuasion},
                                               {"m1", ProbeKind::mobilization},
                                               {"m2", ProbeKind::mobilization},
                                               {"m3", ProbeKind::mobilization}};
  for (auto [id, v] : std::vector<std::pair<std::string, int>>{{"p1", 5}, {"p2", 6}, {"m1", 5}, {"m2", 6}, {"m3", 6}})
    p.ratings.push_back({0, Phase::pfn_probe, id, std::nullopt, v, 7, ""});
  const auto s = score_participant(p, kinds);
  CHECK(s.p == 5.5);
  CHECK(s.m == doctest::Approx(5.667).epsilon(1e-3));
  CHECK_FALSE(s.e);
  CHECK(s.i);
  CHECK(s.d == doctest::Approx(13.0 / 3));

  p.ratings.resize(2);
  CHECK_THROWS_AS(score_participant(p, kinds), std::invalid_argument);
}

TEST_CASE("Table 7 layout") {
  const auto& rows = table7_rows();
  REQUIRE(rows.size() == 14);
  CHECK(rows[0].hypothesis == "H1a");
  CHECK(rows[0].regressor == "E");
  CHECK(rows[0].outcome == Outcome::persuasion);
  CHECK(rows[0].model == ModelSpec{});
  CHECK(rows[0].model.label(Outcome::persuasion) == "C_i + (E + I) -> P");
  CHECK(rows[6].hypothesis.empty());
  CHECK(rows[6].regressor == "D");
  CHECK(rows[13].hypothesis == "H4c");
  CHECK(rows[13].regressor == "DxExI");
  CHECK(rows[13].outcome == Outcome::mobilization);
}

TEST_CASE("model fits name their regressors and use the last country as reference") {
  std::vector<PfnScores> rows;
  Rng rng(8);
  std::normal_distribution<double> z;
  for (int k = 0; k < 400; ++k) {
    const std::string c = k % 3 == 0 ? "Austria" : k % 3 == 1 ? "Belgium" : "Spain";
    const bool e = k % 2, i = (k / 2) % 2;
    const double d = 1 + (k % 7);
    rows.push_back({c, e, i, d, 4 + 0.3 * e + z(rng), 3 + z(rng)});
  }
  const auto fit = fit_pfn_model(rows, Outcome::persuasion, ModelSpec{.ei = true, .d = true});
  CHECK(fit.names == std::vector<std::string>{"(intercept)", "E", "I", "ExI", "D", "C[Austria]", "C[Belgium]"});
  CHECK(fit.n == 400);
  CHECK(fit.n_clusters == 3);
  CHECK_THROWS(fit.coef("DxE"));
}

TEST_CASE("planted-null framing coefficients are rarely significant") {
  // Twenty independent null runs; each Table 7 framing row is one test per run.
  int tests = 0, significant = 0, clean_runs = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    testing::TempDir dir;
    auto cfg = testing::zero_pfn_config(1000 + seed, 2153);
    const auto data = run_pfn(cfg, testing::run_options(dir.path())).data;
    const auto battery = run_table7_battery(score_dataset(testing::read_pfn(data)));
    bool clean = true;
    for (const auto& e : battery.entries) {
      if (e.row.regressor == "D") continue;
      ++tests;
      if (e.p < 0.05) {
        ++significant;
        clean = false;
      }
    }
    clean_runs += clean;
  }
  MESSAGE("significant framing tests: " << significant << " of " << tests << "; runs with none: " << clean_runs);
  CHECK(significant <= tests / 10);
}

TEST_CASE("planted deprivation slope is positive and significant") {
  testing::TempDir dir;
  auto cfg = testing::zero_pfn_config(77, 2153);
  cfg.synthetic.persuasion.coefficients.d = 0.149;
  cfg.synthetic.persuasion.intercept = 3.6;
  const auto data = run_pfn(cfg, testing::run_options(dir.path())).data;
  const auto fit =
      fit_pfn_model(score_dataset(testing::read_pfn(data)), Outcome::persuasion, ModelSpec{.d = true});
  CHECK(fit.coef("D") > 0);
  CHECK(fit.p_of("D") < 0.05);
  CHECK(std::abs(fit.coef("D") - 0.149) < 2 * fit.se_of("D"));
}

TEST_CASE("Table 6 describes per-participant means") {
  std::vector<PfnScores> rows{{"A", false, false, 4, 5.5, 5.0}, {"A", false, false, 4, 4.5, 6.0}};
  const auto t = describe_scores(rows);
  CHECK(t.persuasion.mean == 5.0);
  CHECK(t.persuasion.sd == doctest::Approx(std::sqrt(0.5)));
  CHECK(t.mobilization.mean == 5.5);
  CHECK(t.persuasion.n == 2);
}
