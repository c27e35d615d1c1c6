#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "influence/pipeline.hpp"
#include "influence/report.hpp"
#include "influence/stats/regression.hpp"

namespace fs = std::filesystem;
using namespace influence;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kBackend = 3, kAnalysis = 4 };

struct Common {
  std::optional<std::uint64_t> seed;
  std::string backend_url;
  std::string config;
  std::string data_dir = INFLUENCE_DATA_DIR;
};

void log_line(const std::string& s) { std::cerr << s << '\n'; }

template <class Config>
void apply_overrides(Config& c, const Common& common) {
  if (common.seed) c.seed = *common.seed;
  if (!common.backend_url.empty()) {
    c.backend.kind = "remote";
    c.backend.url = common.backend_url;
  }
}

nlohmann::json config_json(const Common& common) {
  return common.config.empty() ? nlohmann::json::object() : load_config_json(common.config);
}

void print_summary(const RunSummary& s) {
  std::cout << "participants " << s.participants << " (resumed from " << s.resumed_from << "), attempts "
            << s.attempts << ", queries " << s.queries << "\n"
            << "data " << s.data.string() << "\nmanifest " << s.manifest.string() << "\n";
}

void print_reports(const std::vector<ReportFile>& files) {
  for (const auto& f : files)
    if (f.name.ends_with(".txt")) std::cout << f.content << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM survey-experiment simulator and analysis"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Root seed (overrides the config)");
    sub->add_option("--backend-url", common.backend_url, "Use the remote backend at this completions URL");
    sub->add_option("--config", common.config, "JSON config file");
    sub->add_option("--data-dir", common.data_dir, "Base directory for relative input paths");
  };

  // design
  auto* design = app.add_subcommand("design", "Emit or validate design blocks");
  add_common(design);
  std::size_t design_blocks = 10;
  std::string design_out, design_validate;
  std::string bank_file = "statements.txt";
  design->add_option("--blocks", design_blocks, "Number of blocks");
  design->add_option("--bank", bank_file, "Statement bank, relative to the data dir");
  design->add_option("--out", design_out, "Write blocks as JSONL here (default stdout)");
  design->add_option("--validate", design_validate, "Validate an existing blocks JSONL file instead");

  // run-ite / run-pfn
  std::string out_dir, resume_dir;
  std::optional<std::size_t> stop_after;
  auto* run_ite_cmd = app.add_subcommand("run-ite", "Run the illusory-truth study");
  auto* run_pfn_cmd = app.add_subcommand("run-pfn", "Run the populist-framing study");
  for (auto* sub : {run_ite_cmd, run_pfn_cmd}) {
    add_common(sub);
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--resume", resume_dir, "Continue the run stored in this directory");
    sub->add_option("--stop-after", stop_after, "Stop after this many new participants");
  }

  // analyze / report
  std::string data_file, report_out, compare_file;
  std::vector<std::string> kinds;
  std::size_t resamples = 10'000;
  std::uint64_t boot_seed = 1;
  unsigned threads = 0;
  auto* analyze = app.add_subcommand("analyze", "Compute every report for a data file");
  auto* report = app.add_subcommand("report", "Compute selected reports for a data file");
  for (auto* sub : {analyze, report}) {
    add_common(sub);
    sub->add_option("--data", data_file, "Data file (data.jsonl)")->required();
    sub->add_option("--out", report_out, "Report directory (default: next to the data file)");
    sub->add_option("--resamples", resamples, "Bootstrap resamples");
    sub->add_option("--bootstrap-seed", boot_seed, "Bootstrap seed");
    sub->add_option("--threads", threads, "Bootstrap threads (0 = all cores)");
    sub->add_option("--compare", compare_file, "Second ITE data file for fig4 correlations");
  }
  report->add_option("--kind", kinds, "table4 table5 table6 table7 fig4_data fig5_data")->required();

  // calibrate-deprivation
  auto* calibrate = app.add_subcommand("calibrate-deprivation", "Fit the within-person deprivation spread");
  double mu = 4.30, sigma = 1.61, target = 0.5;
  std::size_t draws = 100'000;
  calibrate->add_option("--mean", mu, "Mean of the deprivation score");
  calibrate->add_option("--sd", sigma, "Between-person standard deviation");
  calibrate->add_option("--target", target, "Target probability that all three ratings agree");
  calibrate->add_option("--draws", draws, "Monte Carlo draws");
  calibrate->add_option("--seed", common.seed, "Monte Carlo seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*design) {
      const fs::path data_dir = common.data_dir;
      if (!design_validate.empty()) {
        std::ifstream in(design_validate);
        if (!in) throw ConfigError("cannot read " + design_validate);
        bool ok = true;
        for (const auto& block : read_blocks_jsonl(in)) {
          const auto rep = validate_block(block);
          std::cout << "block " << block.block_id << ": " << (rep.pass() ? "ok" : "FAILED") << "\n";
          if (!rep.pass()) std::cout << rep.summary();
          ok = ok && rep.pass();
        }
        return ok ? kOk : kOther;
      }
      const auto bank = load_bank(data_dir / bank_file);
      const auto seed = common.seed.value_or(1);
      std::ofstream file;
      if (!design_out.empty()) {
        file.open(design_out, std::ios::binary | std::ios::trunc);
        if (!file) throw ConfigError("cannot write " + design_out);
      }
      std::ostream& out = design_out.empty() ? std::cout : file;
      for (std::uint32_t b = 0; b < design_blocks; ++b) write_block_jsonl(out, build_block(bank, b, seed));
      return kOk;
    }

    if (*run_ite_cmd || *run_pfn_cmd) {
      RunOptions options;
      options.data_dir = common.data_dir;
      options.stop_after = stop_after;
      options.log = log_line;
      if (!resume_dir.empty()) {
        print_summary(resume_run(resume_dir, options));
        return kOk;
      }
      if (out_dir.empty()) throw ConfigError("--out or --resume is required");
      options.out_dir = out_dir;
      if (*run_ite_cmd) {
        auto config = ite_config_from_json(config_json(common));
        apply_overrides(config, common);
        print_summary(run_ite(config, options));
      } else {
        auto config = pfn_config_from_json(config_json(common));
        apply_overrides(config, common);
        print_summary(run_pfn(config, options));
      }
      return kOk;
    }

    if (*analyze || *report) {
      AnalysisOptions options;
      options.bootstrap.n_resamples = resamples;
      options.bootstrap.seed = boot_seed;
      options.bootstrap.threads = threads;
      if (!compare_file.empty()) options.compare = fs::path(compare_file);
      std::vector<ReportKind> selected;
      if (*report) {
        for (const auto& k : kinds) {
          const auto kind = report_kind_from_name(k);
          if (!kind) throw ConfigError("unknown report kind " + k);
          selected.push_back(*kind);
        }
      } else {
        selected = default_reports(data_file);
      }
      const auto files = build_reports(data_file, selected, options);
      const fs::path dir = report_out.empty() ? fs::path(data_file).parent_path() / "reports" : fs::path(report_out);
      write_reports(dir, files);
      print_reports(files);
      std::cout << "reports written to " << dir.string() << "\n";
      return kOk;
    }

    if (*calibrate) {
      CalibrationOptions options;
      options.draws = draws;
      if (common.seed) options.seed = *common.seed;
      const auto r = calibrate_perturbation(mu, sigma, target, options);
      const double mean_d = mean_deprivation_score(mu, sigma, r.perturb_sd, draws, options.seed);
      std::cout << nlohmann::json{{"perturb_sd", r.perturb_sd},
                                  {"p_all_equal", r.achieved},
                                  {"iterations", r.iterations},
                                  {"mean_score", mean_d}}
                       .dump(2)
                << "\n";
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const BankError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const TableError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const BackendError& e) {
    std::cerr << "backend error (" << backend_error_kind_name(e.kind()) << "): " << e.what() << "\n";
    return kBackend;
  } catch (const stats::StatsError& e) {
    std::cerr << "analysis error: " << e.what() << "\n";
    return kAnalysis;
  } catch (const DataError& e) {
    std::cerr << "analysis error: " << e.what() << "\n";
    return kAnalysis;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOther;
}
