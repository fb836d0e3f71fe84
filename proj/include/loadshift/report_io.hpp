#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "loadshift/engine.hpp"
#include "loadshift/pipeline.hpp"

namespace loadshift {

inline constexpr int kReportFormatVersion = 1;

// Per-second CSV: t,offered_pps,processed_pps,dropped,queue_depth,selected_index,accuracy,exporting
std::string timeseries_csv(const std::vector<TimeSeriesPoint>& series);
std::vector<TimeSeriesPoint> parse_timeseries_csv(std::string_view text);

std::string switches_csv(const std::vector<SwitchEvent>& switches);

// Totals, accuracy summary and switch count; the timeseries lives in its own file.
std::string report_json(const RunReport& report);

struct ReportSummary {
  std::string label;
  RunTotals totals;
  AccuracySummary accuracy;
};

ReportSummary parse_report_json(std::string_view text);

std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string comparison_csv(const std::vector<ConfigResult>& results);

// One JSON object per line, each tagged with the format version.
std::string features_jsonl(const std::vector<PostProcessedRecord>& records);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace loadshift
