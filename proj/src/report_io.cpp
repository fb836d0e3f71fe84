#include "loadshift/report_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "loadshift/error.hpp"

namespace loadshift {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::string_view kTimeseriesColumns =
    "t,offered_pps,processed_pps,dropped,queue_depth,selected_index,accuracy,exporting";

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view text, std::size_t line_no) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw InputError(fmt::format("timeseries line {}: bad number '{}'", line_no, text));
  }
  return value;
}

ordered_json totals_json(const RunTotals& t) {
  ordered_json j;
  j["offered"] = t.offered;
  j["filtered"] = t.filtered;
  j["injected"] = t.injected;
  j["processed"] = t.processed;
  j["dropped"] = t.dropped;
  j["residual"] = t.residual;
  j["loss_pct"] = t.loss_pct;
  j["drops_during_export"] = t.drops_during_export;
  j["exports"] = t.exports;
  j["export_deferrals"] = t.export_deferrals;
  j["flows_created"] = t.flows_created;
  j["flows_exported"] = t.flows_exported;
  j["evictions"] = t.evictions;
  j["switches"] = t.switches;
  return j;
}

ordered_json summary_json(const SeriesSummary& s) {
  ordered_json j;
  j["count"] = s.count;
  j["min"] = s.min;
  j["mean"] = s.mean;
  j["median"] = s.median;
  j["max"] = s.max;
  j["stdev"] = s.stdev;
  return j;
}

std::string fixed(double v) { return fmt::format("{:.6f}", v); }

}  // namespace

std::string timeseries_csv(const std::vector<TimeSeriesPoint>& series) {
  std::string out(kTimeseriesColumns);
  out += '\n';
  for (const auto& p : series) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", p.t, p.offered_pps, p.processed_pps, p.dropped,
                       p.queue_depth, p.selected_index, fixed(p.accuracy), p.exporting ? 1 : 0);
  }
  return out;
}

std::vector<TimeSeriesPoint> parse_timeseries_csv(std::string_view text) {
  std::vector<TimeSeriesPoint> out;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kTimeseriesColumns) {
        throw InputError(fmt::format("timeseries line {}: unexpected header", line_no));
      }
      header_seen = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 8) {
      throw InputError(fmt::format("timeseries line {}: expected 8 fields, got {}", line_no,
                                   f.size()));
    }
    TimeSeriesPoint p;
    p.t = parse_number<std::uint64_t>(f[0], line_no);
    p.offered_pps = parse_number<std::uint64_t>(f[1], line_no);
    p.processed_pps = parse_number<std::uint64_t>(f[2], line_no);
    p.dropped = parse_number<std::uint64_t>(f[3], line_no);
    p.queue_depth = parse_number<std::uint64_t>(f[4], line_no);
    p.selected_index = parse_number<std::size_t>(f[5], line_no);
    p.accuracy = parse_number<double>(f[6], line_no);
    p.exporting = parse_number<int>(f[7], line_no) != 0;
    out.push_back(p);
  }
  if (!header_seen) throw InputError("timeseries file has no header");
  return out;
}

std::string switches_csv(const std::vector<SwitchEvent>& switches) {
  std::string out = "time_s,old_index,new_index,reason\n";
  for (const auto& e : switches) {
    out += fmt::format("{},{},{},{}\n", fixed(e.time_s), e.old_index, e.new_index,
                       to_string(e.reason));
  }
  return out;
}

std::string report_json(const RunReport& report) {
  ordered_json j;
  j["format"] = "loadshift-report";
  j["version"] = kReportFormatVersion;
  j["label"] = report.label;
  j["seconds"] = report.timeseries.size();
  j["totals"] = totals_json(report.totals);
  j["accuracy"] = {{"median", report.accuracy.median},
                   {"q1", report.accuracy.q1},
                   {"q3", report.accuracy.q3}};
  return j.dump(2) + "\n";
}

ReportSummary parse_report_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != "loadshift-report") {
      throw InputError("not a loadshift report");
    }
    ReportSummary s;
    s.label = j.at("label").get<std::string>();
    const auto& t = j.at("totals");
    s.totals.offered = t.at("offered");
    s.totals.filtered = t.at("filtered");
    s.totals.injected = t.at("injected");
    s.totals.processed = t.at("processed");
    s.totals.dropped = t.at("dropped");
    s.totals.residual = t.at("residual");
    s.totals.loss_pct = t.at("loss_pct");
    s.totals.drops_during_export = t.at("drops_during_export");
    s.totals.exports = t.at("exports");
    s.totals.export_deferrals = t.at("export_deferrals");
    s.totals.flows_created = t.at("flows_created");
    s.totals.flows_exported = t.at("flows_exported");
    s.totals.evictions = t.at("evictions");
    s.totals.switches = t.at("switches");
    const auto& a = j.at("accuracy");
    s.accuracy = {a.at("median"), a.at("q1"), a.at("q3")};
    return s;
  } catch (const json::exception& e) {
    throw InputError(fmt::format("malformed report: {}", e.what()));
  }
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "parameter,value,loss_pct,accuracy_median,accuracy_q1,accuracy_q3\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{}\n", r.parameter, r.value, fixed(r.loss_pct),
                       fixed(r.accuracy.median), fixed(r.accuracy.q1), fixed(r.accuracy.q3));
  }
  return out;
}

std::string comparison_csv(const std::vector<ConfigResult>& results) {
  std::string out =
      "configuration,model_accuracy,loss_pct,dropped,accuracy_median,accuracy_q1,accuracy_q3\n";
  for (const auto& r : results) {
    out += fmt::format("{},{},{},{},{},{},{}\n", r.mode.label(),
                       std::isnan(r.model_accuracy) ? std::string() : fixed(r.model_accuracy),
                       fixed(r.loss_pct), r.dropped, fixed(r.accuracy.median),
                       fixed(r.accuracy.q1), fixed(r.accuracy.q3));
  }
  return out;
}

std::string features_jsonl(const std::vector<PostProcessedRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    ordered_json j;
    j["version"] = kReportFormatVersion;
    j["window"] = r.window_id;
    j["worker"] = r.worker;
    j["flow"] = r.key.to_string();
    j["model"] = r.pinned_index;
    j["packets_a"] = r.packets_a;
    j["packets_b"] = r.packets_b;
    j["bytes_a"] = r.bytes_a;
    j["bytes_b"] = r.bytes_b;
    j["duration_ns"] = r.duration_ns;
    ordered_json features = ordered_json::object();
    for (const auto& f : r.features) {
      ordered_json fj = ordered_json::object();
      for (const auto& [name, summary] : f.series) fj[name] = summary_json(summary);
      for (const auto& [name, value] : f.scalars) fj[name] = value;
      features[f.feature] = std::move(fj);
    }
    j["features"] = std::move(features);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(fmt::format("cannot write {}", path.string()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw InputError(fmt::format("write failed for {}", path.string()));
}

}  // namespace loadshift
