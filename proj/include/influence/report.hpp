#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "influence/ite_analysis.hpp"
#include "influence/pfn_analysis.hpp"

namespace influence {

enum class ReportKind : std::uint8_t { table4, table5, table6, table7, fig4_data, fig5_data };

std::string_view report_kind_name(ReportKind k);
std::optional<ReportKind> report_kind_from_name(std::string_view name);
bool is_ite_report(ReportKind k);

struct ReportFile {
  std::string name;
  std::string content;
};

/// * p < .05, ** p < .01, *** p < .001.
std::string stars(double p);

/// Fixed-point formatting that never prints a negative zero.
std::string fixed(double v, int decimals);

/// Table-4 shape (mixed exposure) or Table-5 shape (same exposure).
std::vector<ReportFile> exposure_table_report(const ExposureEffects& fx, Condition condition);
std::vector<ReportFile> table6_report(const Table6& t);
std::vector<ReportFile> table7_report(const Table7Battery& battery);

/// Per-statement exposure-phase means with intervals, one file per attribute.
/// With a comparison dataset the other side's means and the correlation are added.
std::vector<ReportFile> fig4_report(const IteTable& table, const IteTable* compare = nullptr);

/// Per-statement truth means before and after mixed exposure, plus the fit.
std::vector<ReportFile> fig5_report(const IteTable& table);

struct AnalysisOptions {
  stats::BootstrapOptions bootstrap;
  std::optional<std::filesystem::path> compare;  // second ITE data file for fig4
};

/// Reads a data file and renders the requested reports. Kinds that do not
/// belong to the file's study are an error.
std::vector<ReportFile> build_reports(const std::filesystem::path& data_file, const std::vector<ReportKind>& kinds,
                                      const AnalysisOptions& options = {});

/// All report kinds for the study the file holds.
std::vector<ReportKind> default_reports(const std::filesystem::path& data_file);

void write_reports(const std::filesystem::path& out_dir, const std::vector<ReportFile>& files);

}  // namespace influence
