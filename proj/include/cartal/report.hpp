#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace cartal {

enum class ReportFormat { Csv, Md };

ReportFormat parse_report_format(const std::string& s);

struct ReportTable {
  std::string name;  // file stem / section title
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Builds the report tables available in an experiment directory. Requires
/// rounds.csv and summary.csv; other tables appear when their inputs exist.
std::vector<ReportTable> build_report(const std::filesystem::path& exp_dir);

/// Pipe-delimited markdown table with a header separator row.
std::string render_markdown(const ReportTable& table);

/// Writes report.md or report_<name>.csv files; returns the paths written.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& exp_dir,
                                                ReportFormat format);

}  // namespace cartal
