#include <algorithm>
#include <charconv>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "loadshift/calibrate.hpp"
#include "loadshift/catalog.hpp"
#include "loadshift/cli.hpp"
#include "loadshift/engine.hpp"
#include "loadshift/error.hpp"
#include "loadshift/report_io.hpp"
#include "loadshift/trace.hpp"

namespace loadshift::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

struct SimArgs {
  std::string trace;
  std::string front;
  std::string mode = "adaptive";
  double mon_window = kDefaultMonWindow;
  double dec_factor = kDefaultDecFactor;
  bool floor_decrease = false;
  double export_window = kDefaultExportWindow;
  std::size_t queue_capacity = kDefaultQueueCapacity;
  double cpu_hz = 2e9;
  double poll_interval = 1.0;
  std::optional<Cycles> export_cost;
  bool no_swap = false;
  double scale = 1.0;
  std::uint64_t seed = 1;
  std::optional<std::uint32_t> first_n;

  SimConfig to_config() const {
    SimConfig c;
    c.cpu_hz = cpu_hz;
    c.queue_capacity = queue_capacity;
    c.poll_interval = poll_interval;
    c.export_window = export_window;
    c.export_swap = !no_swap;
    c.export_cost_per_flow = export_cost;
    c.selector.mon_window = mon_window;
    c.selector.dec_factor = dec_factor;
    c.selector.floor_decrease = floor_decrease;
    c.mode = RunMode::parse(mode);
    c.first_n_packets = first_n;
    c.seed = seed;
    return c;
  }
};

void add_sim_options(CLI::App* cmd, SimArgs& a) {
  cmd->add_option("--trace", a.trace, "Trace CSV")->required();
  cmd->add_option("--front", a.front, "Front file or catalog")->required();
  cmd->add_option("--mode", a.mode, "adaptive or static:<i>");
  cmd->add_option("--mon-window", a.mon_window, "Drop-free seconds per step up");
  cmd->add_option("--dec-factor", a.dec_factor, "Index multiplier on drops");
  cmd->add_flag("--floor-decrease", a.floor_decrease, "Round decreased index down");
  cmd->add_option("--export-window", a.export_window, "Seconds between flow table exports");
  cmd->add_option("--queue-capacity", a.queue_capacity, "Receive queue slots per worker");
  cmd->add_option("--cpu-hz", a.cpu_hz, "Worker cycles per second");
  cmd->add_option("--poll-interval", a.poll_interval, "Monitor poll period in seconds");
  cmd->add_option("--export-cost", a.export_cost, "Cycles per exported flow");
  cmd->add_flag("--no-swap", a.no_swap, "Export in place instead of swapping to the backup");
  cmd->add_option("--scale", a.scale, "Rate multiplier applied to the trace");
  cmd->add_option("--seed", a.seed, "Recorded in the manifest");
  cmd->add_option("--first-n", a.first_n, "Override the catalog's first-N packet limit");
}

Trace load_scaled_trace(const fs::path& path, double scale) {
  Trace trace = load_trace(path);
  if (scale != 1.0) trace = scale_trace(trace, scale);
  return trace;
}

std::string feature_names(const Catalog& catalog, FeatureMask mask) {
  std::string out;
  for (auto id : mask.ids()) {
    if (!out.empty()) out += ", ";
    out += catalog.features.at(id).name;
  }
  return out;
}

void print_front(const Catalog& catalog, const ParetoFront& front) {
  fmt::print("{:<6}{:>8}{:>10}  {}\n", "model", "cost", "accuracy", "features");
  for (std::size_t i = 1; i <= front.size(); ++i) {
    const auto& m = front.at(i);
    fmt::print("{:<6}{:>8}{:>10.3f}  {}\n", fmt::format("m{}", i), m.cost, m.accuracy,
               feature_names(catalog, m.mask));
  }
}

// Runs the simulation described by the manifest and writes every output into
// out_dir. Returns the output digests.
std::map<std::string, std::string> execute_run(const RunManifest& m, const fs::path& out_dir,
                                               RunReport* report_out = nullptr) {
  const Trace trace = load_scaled_trace(m.trace_path, m.scale);
  const FrontBundle bundle = load_front_bundle(m.front_path);

  std::vector<PostProcessedRecord> records;
  BatchSink sink;
  if (m.write_features) {
    sink = [&](const ExportBatch& batch) {
      auto rows = post_process(batch, bundle.catalog);
      std::move(rows.begin(), rows.end(), std::back_inserter(records));
    };
  }
  const RunReport report = simulate_run(trace, m.config, bundle.front, bundle.catalog, sink);

  std::map<std::string, std::string> files;
  files["report.json"] = report_json(report);
  files["timeseries.csv"] = timeseries_csv(report.timeseries);
  files["switches.csv"] = switches_csv(report.switches);
  if (m.write_features) files["features.jsonl"] = features_jsonl(records);

  std::map<std::string, std::string> digests;
  for (const auto& [name, text] : files) {
    write_text_file(out_dir / name, text);
    digests[name] = sha256_hex(text);
  }
  if (report_out) *report_out = report;
  return digests;
}

void print_totals(const RunReport& r) {
  const auto& t = r.totals;
  fmt::print("{}: injected={} processed={} dropped={} residual={} loss={:.4f}% "
             "accuracy median={:.3f} q1={:.3f} q3={:.3f} switches={}\n",
             r.label, t.injected, t.processed, t.dropped, t.residual, t.loss_pct,
             r.accuracy.median, r.accuracy.q1, r.accuracy.q3, t.switches);
}

int cmd_profile(const std::string& catalog_path, double epsilon, const std::string& out) {
  const Catalog catalog = load_catalog(catalog_path);
  const ParetoFront front = profile_catalog(catalog, epsilon);
  print_front(catalog, front);
  if (!out.empty()) write_text_file(out, serialize_front(catalog, front));
  return kExitOk;
}

int cmd_run(const SimArgs& a, const std::string& out_dir, bool features) {
  RunManifest m;
  m.tool_version = tool_version();
  m.trace_path = fs::absolute(a.trace);
  m.front_path = fs::absolute(a.front);
  m.trace_sha256 = file_sha256(m.trace_path);
  m.front_sha256 = file_sha256(m.front_path);
  m.scale = a.scale;
  m.write_features = features;
  m.config = a.to_config();
  if (!(a.scale > 0)) throw ConfigError("--scale must be positive");

  RunReport report;
  m.outputs = execute_run(m, out_dir, &report);
  write_text_file(fs::path(out_dir) / "manifest.json", manifest_json(m));
  print_totals(report);
  return kExitOk;
}

int cmd_replay(const std::string& manifest_path, const std::string& out_dir) {
  const RunManifest m = parse_manifest(read_text_file(manifest_path));
  if (file_sha256(m.trace_path) != m.trace_sha256) {
    throw InputError(fmt::format("trace {} does not match the manifest digest",
                                 m.trace_path.string()));
  }
  if (file_sha256(m.front_path) != m.front_sha256) {
    throw InputError(fmt::format("front {} does not match the manifest digest",
                                 m.front_path.string()));
  }
  const auto digests = execute_run(m, out_dir);
  for (const auto& [name, digest] : m.outputs) {
    const auto it = digests.find(name);
    if (it == digests.end() || it->second != digest) {
      throw InvariantError(fmt::format("replayed {} differs from the recorded run", name));
    }
  }
  fmt::print("replay matches: {} files\n", m.outputs.size());
  return kExitOk;
}

std::vector<double> parse_values(const std::vector<std::string>& tokens) {
  std::vector<double> values;
  for (const auto& token : tokens) {
    if (token.empty()) continue;
    double v = 0.0;
    const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || end != token.data() + token.size()) {
      throw UsageError(fmt::format("--values: '{}' is not a number", token));
    }
    values.push_back(v);
  }
  if (values.empty()) throw UsageError("--values needs at least one value");
  return values;
}

int cmd_sweep(const SimArgs& a, const std::string& parameter,
              const std::vector<std::string>& tokens, const std::string& out) {
  const auto values = parse_values(tokens);
  const auto param = parse_sweep_parameter(parameter);
  const Trace trace = load_scaled_trace(a.trace, a.scale);
  const FrontBundle bundle = load_front_bundle(a.front);
  const auto rows = sweep(trace, a.to_config(), bundle.front, bundle.catalog, param, values);
  const std::string csv = sweep_csv(rows);
  if (out.empty()) {
    fmt::print("{}", csv);
  } else {
    write_text_file(out, csv);
    for (const auto& r : rows) {
      fmt::print("{}={}: loss={:.4f}% accuracy median={:.3f}\n", r.parameter, r.value, r.loss_pct,
                 r.accuracy.median);
    }
  }
  return kExitOk;
}

int cmd_compare(const SimArgs& a, const std::string& out) {
  const Trace trace = load_scaled_trace(a.trace, a.scale);
  const FrontBundle bundle = load_front_bundle(a.front);
  const auto results = compare_static_vs_adaptive(trace, a.to_config(), bundle.front,
                                                  bundle.catalog);
  const auto& adaptive = results.back();
  const std::size_t matched = accuracy_matched_index(bundle.front, adaptive.accuracy.median);
  for (const auto& r : results) {
    const bool is_matched = !r.mode.adaptive && r.mode.static_index == matched;
    fmt::print("{:<10} loss={:8.4f}%  accuracy median={:.3f} q1={:.3f} q3={:.3f}{}\n",
               r.mode.label(), r.loss_pct, r.accuracy.median, r.accuracy.q1, r.accuracy.q3,
               is_matched ? "  (accuracy-matched)" : "");
  }
  if (!out.empty()) write_text_file(out, comparison_csv(results));
  return kExitOk;
}

int cmd_report(const std::string& run_dir) {
  const fs::path root(run_dir);
  if (!fs::is_directory(root)) throw InputError(fmt::format("no such run directory: {}", run_dir));
  std::vector<fs::path> runs;
  if (fs::exists(root / "report.json")) runs.push_back(root);
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "report.json")) {
      runs.push_back(entry.path());
    }
  }
  if (runs.empty()) throw InputError(fmt::format("{} contains no run reports", run_dir));
  std::sort(runs.begin(), runs.end());

  std::string scatter = "run,label,loss_pct,accuracy_median,accuracy_q1,accuracy_q3\n";
  std::string combined =
      "run,t,offered_pps,processed_pps,dropped,queue_depth,selected_index,accuracy\n";
  for (const auto& dir : runs) {
    const auto summary = parse_report_json(read_text_file(dir / "report.json"));
    const auto series = parse_timeseries_csv(read_text_file(dir / "timeseries.csv"));
    const std::string name = dir == root ? "." : dir.filename().string();
    scatter += fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", name, summary.label,
                           summary.totals.loss_pct, summary.accuracy.median, summary.accuracy.q1,
                           summary.accuracy.q3);
    std::size_t decreases = 0;
    for (std::size_t i = 1; i < series.size(); ++i) {
      if (series[i].selected_index < series[i - 1].selected_index) ++decreases;
    }
    for (const auto& p : series) {
      combined += fmt::format("{},{},{},{},{},{},{},{:.6f}\n", name, p.t, p.offered_pps,
                              p.processed_pps, p.dropped, p.queue_depth, p.selected_index,
                              p.accuracy);
    }
    fmt::print("{:<24} {:<10} loss={:.4f}% accuracy median={:.3f} seconds={} decreases={}\n", name,
               summary.label, summary.totals.loss_pct, summary.accuracy.median, series.size(),
               decreases);
  }
  write_text_file(root / "scatter.csv", scatter);
  write_text_file(root / "timeseries_all.csv", combined);
  return kExitOk;
}

int cmd_calibrate(const std::string& catalog_path, const std::string& trace_path,
                  const std::string& out, std::size_t rounds) {
  const Catalog catalog = load_catalog(catalog_path);
  const Trace trace = load_trace(trace_path);
  CalibrationOptions options;
  options.rounds = rounds;
  const auto result = calibrate(catalog, trace, options);
  if (result.low_confidence) {
    fmt::print(stderr,
               "warning: only {} tracked packets (< {}); medians have a wide confidence interval\n",
               result.packets, kCalibrationMinPackets);
  }
  fmt::print("counter: {}  packets: {}  base: {:.1f} cycles\n", result.counter_source,
             result.packets, result.base_median_cycles);
  fmt::print("{:<22}{:>12}{:>12}{:>12}\n", "feature", "median", "q1", "q3");
  for (const auto& f : result.features) {
    fmt::print("{:<22}{:>12.2f}{:>12.2f}{:>12.2f}\n", f.name, f.median_cycles, f.q1_cycles,
               f.q3_cycles);
  }
  if (!out.empty()) write_text_file(out, serialize_catalog(result.calibrated));
  return kExitOk;
}

int cmd_gen_trace(SyntheticProfile profile, const std::vector<double>& phases,
                  const std::string& out) {
  Trace trace;
  if (phases.empty()) {
    trace = generate_synthetic(profile);
  } else {
    std::vector<Trace> parts;
    for (std::size_t i = 0; i < phases.size(); ++i) {
      if (!(phases[i] > 0)) throw ConfigError("phase factors must be positive");
      // Each phase is a fresh base-rate trace scaled to the phase factor, so
      // its window lasts duration / factor; stretch the base to compensate.
      SyntheticProfile p = profile;
      p.duration_s = profile.duration_s * phases[i];
      p.seed = profile.seed + i;
      parts.push_back(scale_trace(generate_synthetic(p), phases[i]));
    }
    trace = concat_phases(parts);
  }
  write_trace(trace, out);
  fmt::print("wrote {} packets over {:.3f} s to {}\n", trace.size(),
             static_cast<double>(trace.duration_ns) / 1e9, out);
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Adaptive feature-set selection simulator"};
  app.set_version_flag("--version", tool_version());
  app.set_config("--config", "", "TOML/INI file with option defaults");
  app.require_subcommand(1);

  std::function<int()> action;

  std::string catalog_path;
  double epsilon = kDefaultEpsilon;
  std::string profile_out;
  auto* profile = app.add_subcommand("profile", "Build the Pareto front of a catalog");
  profile->add_option("--catalog", catalog_path, "Catalog file")->required();
  profile->add_option("--epsilon", epsilon, "Marginal accuracy gain threshold");
  profile->add_option("--out", profile_out, "Write the front to this file");
  profile->callback([&] {
    action = [&] { return cmd_profile(catalog_path, epsilon, profile_out); };
  });

  SimArgs run_args;
  std::string run_out = "run";
  bool run_features = false;
  auto* run_cmd = app.add_subcommand("run", "Simulate one configuration over a trace");
  add_sim_options(run_cmd, run_args);
  run_cmd->add_option("--out-dir", run_out, "Output directory");
  run_cmd->add_flag("--features", run_features, "Also write exported flow features");
  run_cmd->callback([&] { action = [&] { return cmd_run(run_args, run_out, run_features); }; });

  std::string manifest_path;
  std::string replay_out;
  auto* replay = app.add_subcommand("replay", "Re-run a manifest and check its digests");
  replay->add_option("--manifest", manifest_path, "manifest.json of a previous run")->required();
  replay->add_option("--out-dir", replay_out, "Output directory")->required();
  replay->callback([&] { action = [&] { return cmd_replay(manifest_path, replay_out); }; });

  SimArgs sweep_args;
  std::string sweep_param = "mon_window";
  std::vector<std::string> sweep_values;
  std::string sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "Vary one selector parameter");
  add_sim_options(sweep_cmd, sweep_args);
  sweep_cmd->add_option("--param", sweep_param, "mon_window or dec_factor");
  sweep_cmd->add_option("--values", sweep_values, "Comma-separated values")
      ->required()
      ->delimiter(',');
  sweep_cmd->add_option("--out", sweep_out, "CSV output (stdout when omitted)");
  sweep_cmd->callback([&] {
    action = [&] { return cmd_sweep(sweep_args, sweep_param, sweep_values, sweep_out); };
  });

  SimArgs compare_args;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Every static configuration against adaptive");
  add_sim_options(compare, compare_args);
  compare->add_option("--out", compare_out, "CSV output");
  compare->callback([&] { action = [&] { return cmd_compare(compare_args, compare_out); }; });

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Summarize run directories");
  report->add_option("run_dir", report_dir, "Run directory or a directory of runs")->required();
  report->callback([&] { action = [&] { return cmd_report(report_dir); }; });

  std::string cal_catalog;
  std::string cal_trace;
  std::string cal_out;
  std::size_t cal_rounds = 5;
  auto* cal = app.add_subcommand("calibrate", "Measure feature update costs");
  cal->add_option("--catalog", cal_catalog, "Catalog file")->required();
  cal->add_option("--trace", cal_trace, "Sample trace")->required();
  cal->add_option("--out", cal_out, "Write the calibrated catalog here");
  cal->add_option("--rounds", cal_rounds, "Passes over the trace per feature");
  cal->callback([&] {
    action = [&] { return cmd_calibrate(cal_catalog, cal_trace, cal_out, cal_rounds); };
  });

  SyntheticProfile gen;
  std::vector<double> gen_phases;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen-trace", "Write a synthetic trace");
  gen_cmd->add_option("--duration", gen.duration_s, "Seconds (per phase with --phases)");
  gen_cmd->add_option("--pps", gen.target_pps, "Target packets per second");
  gen_cmd->add_option("--flow-rate", gen.flow_arrival_rate, "New flows per second (0 = auto)");
  gen_cmd->add_option("--flow-shape", gen.flow_sizes.shape, "Pareto shape of flow sizes");
  gen_cmd->add_option("--udp-fraction", gen.udp_fraction, "Share of UDP flows");
  gen_cmd->add_option("--untracked-fraction", gen.untracked_fraction, "Share of ICMP packets");
  gen_cmd->add_option("--gaps-per-minute", gen.gaps_per_minute, "Capture holes per minute");
  gen_cmd->add_option("--seed", gen.seed, "Random seed");
  gen_cmd->add_option("--phases", gen_phases, "Rate factors of consecutive phases")
      ->delimiter(',');
  gen_cmd->add_option("--out", gen_out, "Trace CSV")->required();
  gen_cmd->callback([&] { action = [&] { return cmd_gen_trace(gen, gen_phases, gen_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action ? action() : kExitUsage;
  } catch (const UsageError& e) {
    fmt::print(stderr, "usage error: {}\n", e.what());
    return kExitUsage;
  } catch (const InputError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInput;
  } catch (const InvariantError& e) {
    fmt::print(stderr, "invariant violated: {}\n", e.what());
    return kExitInvariant;
  } catch (const std::filesystem::filesystem_error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    fmt::print(stderr, "internal error: {}\n", e.what());
    return kExitInvariant;
  }
}

}  // namespace loadshift::cli
