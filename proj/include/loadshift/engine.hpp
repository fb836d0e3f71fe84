#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "loadshift/catalog.hpp"
#include "loadshift/pipeline.hpp"
#include "loadshift/selector.hpp"
#include "loadshift/trace.hpp"

namespace loadshift {

inline constexpr std::size_t kDefaultQueueCapacity = 4096;
inline constexpr double kDefaultExportWindow = 30.0;
// Default per-flow export cost: exporting this many flows takes one second.
inline constexpr double kFlowsExportedPerSecond = 1e4;

struct RunMode {
  bool adaptive = true;
  std::size_t static_index = 0;  // used when !adaptive

  static RunMode adaptive_mode() { return {true, 0}; }
  static RunMode fixed(std::size_t index) { return {false, index}; }
  // "adaptive" or "static:<i>"
  static RunMode parse(std::string_view text);
  std::string label() const;
  bool operator==(const RunMode&) const = default;
};

struct SimConfig {
  double cpu_hz = 2e9;  // cycles per second per worker
  std::size_t queue_capacity = kDefaultQueueCapacity;
  double poll_interval = 1.0;  // seconds
  double export_window = kDefaultExportWindow;
  bool export_swap = true;  // false: the active worker exports in place
  std::optional<Cycles> export_cost_per_flow;  // default cpu_hz / kFlowsExportedPerSecond
  SelectorParams selector;   // k_max is taken from the front
  RunMode mode;
  std::size_t flow_table_capacity = 1u << 20;
  double flow_idle_timeout = 120.0;  // seconds
  std::optional<std::uint32_t> first_n_packets;  // overrides the catalog
  std::uint64_t seed = 1;  // recorded for reproduction; the engine itself is deterministic

  void validate(const ParetoFront& front) const;
  Cycles effective_export_cost() const;
};

// Receive ring of one worker. The packet in service still occupies a slot.
class RxQueue {
 public:
  explicit RxQueue(std::size_t capacity) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t occupancy() const { return occupancy_; }
  std::uint64_t rx_miss() const { return rx_miss_; }

  // False (and rx_miss + 1) when full.
  bool try_enqueue() {
    if (occupancy_ >= capacity_) {
      ++rx_miss_;
      return false;
    }
    ++occupancy_;
    return true;
  }
  void dequeue() { --occupancy_; }

 private:
  std::size_t capacity_;
  std::size_t occupancy_ = 0;
  std::uint64_t rx_miss_ = 0;
};

struct TimeSeriesPoint {
  std::uint64_t t = 0;  // second index
  std::uint64_t offered_pps = 0;
  std::uint64_t processed_pps = 0;
  std::uint64_t dropped = 0;
  std::uint64_t queue_depth = 0;  // at the end of the second
  std::size_t selected_index = 0;
  double accuracy = 0.0;  // offline accuracy of the selected model
  bool exporting = false;

  bool operator==(const TimeSeriesPoint&) const = default;
};

struct RunTotals {
  std::uint64_t offered = 0;   // every packet in the trace
  std::uint64_t filtered = 0;  // untracked protocols, never enqueued
  std::uint64_t injected = 0;  // offered - filtered
  std::uint64_t processed = 0;
  std::uint64_t dropped = 0;
  std::uint64_t residual = 0;  // still queued when the run ends
  double loss_pct = 0.0;       // dropped / injected
  std::uint64_t drops_during_export = 0;
  std::uint64_t exports = 0;
  std::uint64_t export_deferrals = 0;
  std::uint64_t flows_created = 0;
  std::uint64_t flows_exported = 0;
  std::uint64_t evictions = 0;
  std::uint64_t switches = 0;

  bool operator==(const RunTotals&) const = default;
};

struct AccuracySummary {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;

  bool operator==(const AccuracySummary&) const = default;
};

struct RunReport {
  std::string label;
  std::vector<TimeSeriesPoint> timeseries;
  std::vector<SwitchEvent> switches;
  RunTotals totals;
  AccuracySummary accuracy;

  bool operator==(const RunReport&) const = default;
};

// Receives each export batch as it completes (including the final flush).
using BatchSink = std::function<void(const ExportBatch&)>;

// Throws InvariantError if packet conservation fails.
RunReport simulate_run(const Trace& trace, const SimConfig& config, const ParetoFront& front,
                       const Catalog& catalog, const BatchSink& sink = {});

struct SweepRow {
  std::string parameter;
  double value = 0.0;
  double loss_pct = 0.0;
  AccuracySummary accuracy;
};

enum class SweepParameter { mon_window, dec_factor };

SweepParameter parse_sweep_parameter(std::string_view name);
std::string_view to_string(SweepParameter parameter);

std::vector<SweepRow> sweep(const Trace& trace, const SimConfig& config, const ParetoFront& front,
                            const Catalog& catalog, SweepParameter parameter,
                            const std::vector<double>& values);

std::vector<SweepRow> sweep_mon_window(const Trace& trace, const SimConfig& config,
                                       const ParetoFront& front, const Catalog& catalog,
                                       const std::vector<double>& values);

struct ConfigResult {
  RunMode mode;
  double model_accuracy = 0.0;  // offline accuracy for static modes, NaN for adaptive
  double loss_pct = 0.0;
  std::uint64_t dropped = 0;
  AccuracySummary accuracy;
};

// One static run per front index, then the adaptive run (last element).
std::vector<ConfigResult> compare_static_vs_adaptive(const Trace& trace, const SimConfig& config,
                                                     const ParetoFront& front,
                                                     const Catalog& catalog);

// The static configuration an adaptive result is measured against: the most
// accurate front model whose accuracy does not exceed the adaptive median.
std::size_t accuracy_matched_index(const ParetoFront& front, double adaptive_median);

}  // namespace loadshift
