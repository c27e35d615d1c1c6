#include "influence/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "influence/pipeline.hpp"

namespace influence {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<ReportKind, std::string_view>, 6> kReportNames = {{
    {ReportKind::table4, "table4"},
    {ReportKind::table5, "table5"},
    {ReportKind::table6, "table6"},
    {ReportKind::table7, "table7"},
    {ReportKind::fig4_data, "fig4_data"},
    {ReportKind::fig5_data, "fig5_data"},
}};

std::string num(double v) { return fixed(v, 6); }

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string lpad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

std::string interval_cell(const stats::BootstrapInterval& b) {
  return lpad(fixed(b.estimate, 2), 5) + pad(stars(b.p), 3) + " [" + lpad(fixed(b.lo, 2), 5) + ", " +
         lpad(fixed(b.hi, 2), 5) + "]";
}

std::vector<double> values_of(const std::vector<ExposureObservation>& obs, std::uint32_t statement, Attribute a) {
  std::vector<double> v;
  for (const auto& o : obs)
    if (o.statement == statement && o.attribute == a) v.push_back(o.value);
  return v;
}

}  // namespace

std::string_view report_kind_name(ReportKind k) {
  for (const auto& [kind, name] : kReportNames)
    if (kind == k) return name;
  return "?";
}

std::optional<ReportKind> report_kind_from_name(std::string_view name) {
  for (const auto& [kind, n] : kReportNames)
    if (n == name) return kind;
  return std::nullopt;
}

bool is_ite_report(ReportKind k) {
  return k == ReportKind::table4 || k == ReportKind::table5 || k == ReportKind::fig4_data ||
         k == ReportKind::fig5_data;
}

std::string stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

std::string fixed(double v, int decimals) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::vector<ReportFile> exposure_table_report(const ExposureEffects& fx, Condition condition) {
  if (condition == Condition::fresh) throw std::invalid_argument("exposure table needs mixed or same exposure");
  const bool mixed = condition == Condition::mixed;
  const auto& fits = mixed ? fx.mixed : fx.same;
  const std::string base = mixed ? "table4" : "table5";

  std::string csv = "test_attribute,coefficient,estimate,ci_lo,ci_hi,p_corrected,stars,statements\n";
  std::string text = std::string(mixed ? "Mixed" : "Same") +
                     " exposure: offset and tilt per test attribute\n"
                     "Bonferroni-corrected bootstrap intervals at level " +
                     fixed(fx.corrected_level, 6) + ", " + std::to_string(fx.resamples_used) + " resamples (" +
                     std::to_string(fx.resamples_dropped) + " dropped)\n\n" + pad("attribute", 12) +
                     pad("offset", 25) + "tilt\n";
  for (std::size_t a = 0; a < kNumAttributes; ++a) {
    const auto& f = fits[a];
    const std::string name(attribute_name(kAttributes[a]));
    for (const auto& [coef, b] : {std::pair{"offset", f.ci_offset}, std::pair{"tilt", f.ci_tilt}})
      csv += name + "," + coef + "," + num(b.estimate) + "," + num(b.lo) + "," + num(b.hi) + "," + num(b.p) + "," +
             stars(b.p) + "," + std::to_string(f.statements) + "\n";
    text += pad(name, 12) + pad(interval_cell(f.ci_offset), 25) + interval_cell(f.ci_tilt) + "\n";
  }
  text += "\n* p < .05, ** p < .01, *** p < .001 (corrected)\n";
  return {{base + ".csv", csv}, {base + ".txt", text}};
}

std::vector<ReportFile> table6_report(const Table6& t) {
  std::string csv = "outcome,mean,sd,n\n";
  std::string text = "Per-participant mean ratings, mean (sd)\n\n";
  for (const auto& [label, m] : {std::pair{"P", t.persuasion}, std::pair{"M", t.mobilization}}) {
    csv += std::string(label) + "," + num(m.mean) + "," + num(m.sd) + "," + std::to_string(m.n) + "\n";
    text += pad(label, 4) + fixed(m.mean, 2) + " (" + fixed(m.sd, 2) + ")\n";
  }
  return {{"table6.csv", csv}, {"table6.txt", text}};
}

std::vector<ReportFile> table7_report(const Table7Battery& battery) {
  std::string csv = "hypothesis,model,regressor,coef,se,t,p,stars,n,clusters\n";
  std::string text = "Country-clustered regressions (CR1 standard errors)\n\n" + pad("", 6) + pad("model", 62) +
                     pad("regressor", 10) + "coef\n";
  for (const auto& e : battery.entries) {
    const auto label = e.row.model.label(e.row.outcome);
    std::size_t n = 0, clusters = 0;
    for (const auto& f : battery.fits)
      if (f.model == label) {
        n = f.n;
        clusters = f.n_clusters;
      }
    csv += e.row.hypothesis + ",\"" + label + "\"," + e.row.regressor + "," + num(e.coef) + "," + num(e.se) + "," +
           num(e.t) + "," + num(e.p) + "," + stars(e.p) + "," + std::to_string(n) + "," + std::to_string(clusters) +
           "\n";
    text += pad(e.row.hypothesis, 6) + pad(label, 62) + pad(e.row.regressor, 10) +
            lpad((e.coef >= 0 ? "+" : "") + fixed(e.coef, 3), 7) + stars(e.p) + "\n";
  }
  text += "\n* p < .05, ** p < .01, *** p < .001\n";
  return {{"table7.csv", csv}, {"table7.txt", text}};
}

std::vector<ReportFile> fig4_report(const IteTable& table, const IteTable* compare) {
  std::vector<ReportFile> files;
  std::string summary = "attribute,r,ci_lo,ci_hi,statements\n";
  for (Attribute a : kAttributes) {
    std::string csv = "statement_id,mean,ci_lo,ci_hi,n";
    if (compare) csv += ",compare_mean,compare_ci_lo,compare_ci_hi,compare_n";
    csv += "\n";
    std::vector<double> xs, ys;
    for (std::uint32_t s = 0; s < table.statements(); ++s) {
      const auto v = values_of(table.exposure(), s, a);
      if (v.empty()) continue;
      const auto ci = stats::mean_ci(v);
      const auto& id = table.statement_ids()[s];
      std::string row = id + "," + num(ci.mean) + "," + num(ci.lo) + "," + num(ci.hi) + "," + std::to_string(ci.n);
      if (compare) {
        const auto& ids = compare->statement_ids();
        const auto it = std::find(ids.begin(), ids.end(), id);
        if (it == ids.end()) continue;
        const auto w = values_of(compare->exposure(), static_cast<std::uint32_t>(it - ids.begin()), a);
        if (w.empty()) continue;
        const auto cc = stats::mean_ci(w);
        row += "," + num(cc.mean) + "," + num(cc.lo) + "," + num(cc.hi) + "," + std::to_string(cc.n);
        xs.push_back(cc.mean);
        ys.push_back(ci.mean);
      }
      csv += row + "\n";
    }
    files.push_back({"fig4_" + std::string(attribute_name(a)) + ".csv", csv});
    if (compare) {
      const auto c = stats::pearson_ci(xs, ys);
      summary += std::string(attribute_name(a)) + "," + num(c.r) + "," + num(c.lo) + "," + num(c.hi) + "," +
                 std::to_string(c.n) + "\n";
    }
  }
  if (compare) files.push_back({"fig4_correlations.csv", summary});
  return files;
}

std::vector<ReportFile> fig5_report(const IteTable& table) {
  std::string csv = "statement_id,r,r_ci_lo,r_ci_hi,r_n,r_prime,r_prime_ci_lo,r_prime_ci_hi,r_prime_n\n";
  for (const auto& m : exposure_means_with_ci(table, Attribute::truth, Condition::mixed))
    csv += m.statement_id + "," + num(m.fresh.mean) + "," + num(m.fresh.lo) + "," + num(m.fresh.hi) + "," +
           std::to_string(m.fresh.n) + "," + num(m.exposed.mean) + "," + num(m.exposed.lo) + "," +
           num(m.exposed.hi) + "," + std::to_string(m.exposed.n) + "\n";
  const auto fit = fit_offset_tilt(exposure_pairs(table, Attribute::truth, Condition::mixed));
  const std::string fit_csv = "offset,tilt,midpoint\n" + num(fit.offset) + "," + num(fit.tilt) + "," +
                              num(stats::kScaleMidpoint) + "\n";
  return {{"fig5_truth_mixed.csv", csv}, {"fig5_fit.csv", fit_csv}};
}

std::vector<ReportKind> default_reports(const fs::path& data_file) {
  if (detect_study(data_file) == "ite")
    return {ReportKind::table4, ReportKind::table5, ReportKind::fig4_data, ReportKind::fig5_data};
  return {ReportKind::table6, ReportKind::table7};
}

std::vector<ReportFile> build_reports(const fs::path& data_file, const std::vector<ReportKind>& kinds,
                                      const AnalysisOptions& options) {
  const auto study = detect_study(data_file);
  for (auto k : kinds)
    if (is_ite_report(k) != (study == "ite"))
      throw DataError(std::string(report_kind_name(k)) + " does not apply to a " + study + " data file");

  std::ifstream in(data_file, std::ios::binary);
  std::vector<ReportFile> files;
  auto append = [&](std::vector<ReportFile> more) {
    for (auto& f : more) files.push_back(std::move(f));
  };
  auto wants = [&](ReportKind k) { return std::find(kinds.begin(), kinds.end(), k) != kinds.end(); };

  if (study == "ite") {
    const IteTable table(read_ite_dataset(in));
    if (wants(ReportKind::table4) || wants(ReportKind::table5)) {
      const auto fx = analyze_exposure_effects(table, options.bootstrap);
      if (wants(ReportKind::table4)) append(exposure_table_report(fx, Condition::mixed));
      if (wants(ReportKind::table5)) append(exposure_table_report(fx, Condition::same));
    }
    if (wants(ReportKind::fig4_data)) {
      if (options.compare) {
        std::ifstream cin(*options.compare, std::ios::binary);
        if (!cin) throw DataError("cannot read " + options.compare->string());
        const IteTable other(read_ite_dataset(cin));
        append(fig4_report(table, &other));
      } else {
        append(fig4_report(table));
      }
    }
    if (wants(ReportKind::fig5_data)) append(fig5_report(table));
  } else {
    const auto scores = score_dataset(read_pfn_dataset(in));
    if (wants(ReportKind::table6)) append(table6_report(describe_scores(scores)));
    if (wants(ReportKind::table7)) append(table7_report(run_table7_battery(scores)));
  }
  return files;
}

void write_reports(const fs::path& out_dir, const std::vector<ReportFile>& files) {
  fs::create_directories(out_dir);
  for (const auto& f : files) {
    std::ofstream out(out_dir / f.name, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (out_dir / f.name).string());
    out << f.content;
  }
}

}  // namespace influence
