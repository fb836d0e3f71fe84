#include "loadshift/engine.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <future>
#include <limits>

#include <fmt/format.h>

#include "loadshift/error.hpp"
#include "loadshift/stats.hpp"

namespace loadshift {

namespace {

using Picos = std::int64_t;

constexpr Picos kPicosPerSecond = 1'000'000'000'000;
constexpr Picos kPicosPerNano = 1'000;
constexpr Picos kNever = std::numeric_limits<Picos>::max();
// Keeps now + service from overflowing when the budget is absurdly small.
constexpr Picos kServiceCeiling = kNever / 4;

Picos to_picos(double seconds) {
  return static_cast<Picos>(std::llround(seconds * static_cast<double>(kPicosPerSecond)));
}

Picos cycles_to_picos(Cycles cycles, double cpu_hz) {
  const double ps = static_cast<double>(cycles) * static_cast<double>(kPicosPerSecond) / cpu_hz;
  if (!(ps < static_cast<double>(kServiceCeiling))) return kServiceCeiling;
  return std::max<Picos>(static_cast<Picos>(std::llround(ps)), 1);
}

enum class ExportPhase { none, pending, busy };

struct Lane {
  explicit Lane(std::size_t capacity) : rx(capacity) {}

  RxQueue rx;
  std::deque<std::size_t> queued;  // trace indices, front is in service when busy
  bool in_service = false;
  Picos service_end = kNever;
  ExportPhase export_phase = ExportPhase::none;
  Picos export_end = kNever;
  Nanos window_start = 0;
  Nanos window_end = 0;
};

class Engine {
 public:
  Engine(const Trace& trace, const SimConfig& config, const ParetoFront& front,
         const Catalog& catalog, const BatchSink& sink)
      : trace_(trace),
        config_(config),
        front_(front),
        sink_(sink),
        pipeline_(catalog, front, make_settings(config)),
        lanes_{Lane(config.queue_capacity), Lane(config.queue_capacity)} {
    params_ = config.selector;
    params_.k_max = front.size();
    const std::size_t initial = config.mode.adaptive ? 1 : config.mode.static_index;
    state_.index = initial;
    pipeline_.selection().publish(initial);
    poll_ps_ = to_picos(config.poll_interval);
    export_ps_ = to_picos(config.export_window);
    export_cost_ = config.effective_export_cost();

    const Nanos last_ts = trace.packets.empty() ? 0 : trace.packets.back().ts_ns;
    const auto ceil_s = (trace.duration_ns + kNanosPerSecond - 1) / kNanosPerSecond;
    horizon_s_ = std::max<std::int64_t>(ceil_s, last_ts / kNanosPerSecond + 1);
    horizon_ps_ = horizon_s_ * kPicosPerSecond;
  }

  RunReport run();

 private:
  static PipelineSettings make_settings(const SimConfig& config) {
    PipelineSettings s;
    s.first_n_packets = config.first_n_packets;
    s.flow_table_capacity = config.flow_table_capacity;
    s.export_cost_per_flow = config.effective_export_cost();
    s.flow_idle_timeout_ns = static_cast<Nanos>(std::llround(config.flow_idle_timeout * 1e9));
    return s;
  }

  bool any_exporting() const {
    return std::any_of(lanes_.begin(), lanes_.end(),
                       [](const Lane& l) { return l.export_phase != ExportPhase::none; });
  }

  void try_start(WorkerId id, Picos now);
  void on_arrival(std::size_t i, Picos now);
  void on_completion(WorkerId id, Picos now);
  void on_export_tick(Picos now);
  void on_export_done(WorkerId id, Picos now);
  void on_poll_tick(Picos now);
  void close_bin();
  void final_flush();
  void emit(const ExportBatch& batch) {
    totals_.flows_exported += batch.flows.size();
    if (sink_) sink_(batch);
  }

  const Trace& trace_;
  const SimConfig& config_;
  const ParetoFront& front_;
  const BatchSink& sink_;
  Pipeline pipeline_;
  std::array<Lane, 2> lanes_;
  SelectorParams params_;
  SelectorState state_;

  Picos poll_ps_ = 0;
  Picos export_ps_ = 0;
  Cycles export_cost_ = 0;
  std::int64_t horizon_s_ = 0;
  Picos horizon_ps_ = 0;
  Nanos last_export_ns_ = 0;
  std::uint64_t last_rx_miss_ = 0;

  RunTotals totals_;
  TimeSeriesPoint bin_;
  std::vector<TimeSeriesPoint> series_;
  std::vector<SwitchEvent> switches_;
};

void Engine::try_start(WorkerId id, Picos now) {
  Lane& lane = lanes_[id];
  if (lane.in_service || lane.export_phase == ExportPhase::busy) return;
  if (lane.export_phase == ExportPhase::pending && (!config_.export_swap || lane.queued.empty())) {
    auto batch = pipeline_.drain_for_export(id, lane.window_start, lane.window_end);
    lane.export_phase = ExportPhase::busy;
    lane.export_end = now + cycles_to_picos(batch.export_cycles, config_.cpu_hz);
    emit(batch);
    return;
  }
  if (lane.queued.empty()) return;
  const Cycles cycles = pipeline_.process_packet(id, trace_.packets[lane.queued.front()]);
  lane.in_service = true;
  lane.service_end = now + cycles_to_picos(cycles, config_.cpu_hz);
}

void Engine::on_arrival(std::size_t i, Picos now) {
  const PacketRecord& packet = trace_.packets[i];
  ++totals_.offered;
  const auto worker = pipeline_.route(packet);
  if (!worker) {
    ++totals_.filtered;
    return;
  }
  ++totals_.injected;
  ++bin_.offered_pps;
  Lane& lane = lanes_[*worker];
  if (!lane.rx.try_enqueue()) {
    ++totals_.dropped;
    ++bin_.dropped;
    if (any_exporting()) ++totals_.drops_during_export;
    return;
  }
  lane.queued.push_back(i);
  try_start(*worker, now);
}

void Engine::on_completion(WorkerId id, Picos now) {
  Lane& lane = lanes_[id];
  lane.in_service = false;
  lane.service_end = kNever;
  lane.queued.pop_front();
  lane.rx.dequeue();
  ++totals_.processed;
  ++bin_.processed_pps;
  try_start(id, now);
}

void Engine::on_export_tick(Picos now) {
  const Nanos now_ns = now / kPicosPerNano;
  pipeline_.expire_pins(now_ns);
  const WorkerId active = pipeline_.table().active();
  Lane& lane = lanes_[active];
  if (config_.export_swap) {
    const WorkerId mate = pipeline_.companion(active);
    if (pipeline_.worker(mate).role() != WorkerRole::backup) {
      ++totals_.export_deferrals;
      return;
    }
    pipeline_.begin_export(active);
  } else if (lane.export_phase != ExportPhase::none) {
    ++totals_.export_deferrals;
    return;
  }
  ++totals_.exports;
  lane.export_phase = ExportPhase::pending;
  lane.window_start = last_export_ns_;
  lane.window_end = now_ns;
  last_export_ns_ = now_ns;
  try_start(active, now);
}

void Engine::on_export_done(WorkerId id, Picos now) {
  Lane& lane = lanes_[id];
  lane.export_phase = ExportPhase::none;
  lane.export_end = kNever;
  if (config_.export_swap) pipeline_.finish_export(id);
  try_start(id, now);
}

void Engine::on_poll_tick(Picos now) {
  const std::uint64_t misses = lanes_[0].rx.rx_miss() + lanes_[1].rx.rx_miss();
  const DropSignal signal{misses - last_rx_miss_, static_cast<double>(now) / kPicosPerSecond};
  last_rx_miss_ = misses;
  if (!config_.mode.adaptive) return;
  const auto outcome = on_poll(state_, params_, signal, config_.poll_interval);
  state_ = outcome.state;
  if (outcome.event) {
    switches_.push_back(*outcome.event);
    pipeline_.selection().publish(state_.index);
  }
}

void Engine::close_bin() {
  bin_.t = series_.size();
  bin_.queue_depth = lanes_[0].rx.occupancy() + lanes_[1].rx.occupancy();
  bin_.selected_index = pipeline_.selection().read();
  bin_.accuracy = front_.at(bin_.selected_index).accuracy;
  bin_.exporting = bin_.exporting || any_exporting();
  series_.push_back(bin_);
  bin_ = TimeSeriesPoint{};
  bin_.exporting = any_exporting();
}

void Engine::final_flush() {
  const Nanos end_ns = horizon_ps_ / kPicosPerNano;
  for (WorkerId id : {Pipeline::kFirstWorker, Pipeline::kSecondWorker}) {
    if (pipeline_.worker(id).flow_count() == 0) continue;
    emit(pipeline_.drain_for_export(id, last_export_ns_, end_ns));
  }
}

RunReport Engine::run() {
  const auto& packets = trace_.packets;
  std::size_t next_packet = 0;
  std::int64_t next_bin = 1;
  std::int64_t next_poll = 1;
  std::int64_t next_export = 1;

  for (;;) {
    const Picos t_bin = next_bin <= horizon_s_ ? next_bin * kPicosPerSecond : kNever;
    const Picos t_poll = next_poll * poll_ps_ <= horizon_ps_ ? next_poll * poll_ps_ : kNever;
    const Picos t_export = next_export * export_ps_ < horizon_ps_ ? next_export * export_ps_ : kNever;
    const Picos t_arrival =
        next_packet < packets.size() ? packets[next_packet].ts_ns * kPicosPerNano : kNever;

    // Ties resolve in this order: bin, poll, export tick, completion,
    // export done, arrival.
    Picos best = t_bin;
    int kind = 0;
    WorkerId lane_id = 0;
    auto consider = [&](Picos t, int k, WorkerId id = 0) {
      if (t < best) {
        best = t;
        kind = k;
        lane_id = id;
      }
    };
    consider(t_poll, 1);
    consider(t_export, 2);
    consider(lanes_[0].service_end, 3, 0);
    consider(lanes_[1].service_end, 3, 1);
    consider(lanes_[0].export_end, 4, 0);
    consider(lanes_[1].export_end, 4, 1);
    consider(t_arrival, 5);
    if (best == kNever || best > horizon_ps_) break;

    switch (kind) {
      case 0: close_bin(); ++next_bin; break;
      case 1: on_poll_tick(best); ++next_poll; break;
      case 2: on_export_tick(best); ++next_export; break;
      case 3: on_completion(lane_id, best); break;
      case 4: on_export_done(lane_id, best); break;
      default: on_arrival(next_packet++, best); break;
    }
    if (kind == 2 || kind == 4) bin_.exporting = bin_.exporting || any_exporting();
  }
  final_flush();

  RunReport report;
  report.label = config_.mode.label();
  totals_.residual = lanes_[0].rx.occupancy() + lanes_[1].rx.occupancy();
  totals_.flows_created = pipeline_.flows_created();
  totals_.evictions = pipeline_.evictions();
  totals_.switches = switches_.size();
  totals_.loss_pct = totals_.injected == 0
                         ? 0.0
                         : 100.0 * static_cast<double>(totals_.dropped) /
                               static_cast<double>(totals_.injected);
  if (totals_.injected != totals_.processed + totals_.dropped + totals_.residual ||
      totals_.offered != totals_.injected + totals_.filtered) {
    throw InvariantError(fmt::format(
        "packet conservation violated: injected={} processed={} dropped={} residual={}",
        totals_.injected, totals_.processed, totals_.dropped, totals_.residual));
  }
  if (!series_.empty()) {
    std::vector<double> acc;
    acc.reserve(series_.size());
    for (const auto& p : series_) acc.push_back(p.accuracy);
    report.accuracy = {quantile(acc, 0.5), quantile(acc, 0.25), quantile(acc, 0.75)};
  }
  report.totals = totals_;
  report.timeseries = std::move(series_);
  report.switches = std::move(switches_);
  return report;
}

template <typename T, typename Fn>
auto run_parallel(const std::vector<T>& items, Fn fn) {
  using R = decltype(fn(items.front()));
  std::vector<std::future<R>> futures;
  futures.reserve(items.size());
  for (const auto& item : items) {
    futures.push_back(std::async(std::launch::async, [&fn, &item] { return fn(item); }));
  }
  std::vector<R> out;
  out.reserve(items.size());
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

}  // namespace

RunMode RunMode::parse(std::string_view text) {
  if (text == "adaptive") return adaptive_mode();
  constexpr std::string_view prefix = "static:";
  if (text.starts_with(prefix)) {
    const auto digits = text.substr(prefix.size());
    std::size_t index = 0;
    const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
    if (ec == std::errc{} && end == digits.data() + digits.size() && !digits.empty()) {
      return fixed(index);
    }
  }
  throw ConfigError(fmt::format("invalid mode '{}': expected adaptive or static:<i>", text));
}

std::string RunMode::label() const {
  return adaptive ? std::string("adaptive") : fmt::format("static:{}", static_index);
}

void SimConfig::validate(const ParetoFront& front) const {
  if (front.empty()) throw ConfigError("front is empty");
  if (!(cpu_hz > 0) || !std::isfinite(cpu_hz)) throw ConfigError("cpu_hz must be positive");
  if (queue_capacity < 1) throw ConfigError("queue_capacity must be at least 1");
  if (!(poll_interval > 0)) throw ConfigError("poll_interval must be positive");
  if (!(export_window > 0)) throw ConfigError("export_window must be positive");
  if (!(flow_idle_timeout > 0)) throw ConfigError("flow_idle_timeout must be positive");
  if (flow_table_capacity < 1) throw ConfigError("flow_table_capacity must be at least 1");
  if (!mode.adaptive && (mode.static_index < 1 || mode.static_index > front.size())) {
    throw ConfigError(fmt::format("static index {} out of range: valid indices are 1..{}",
                                  mode.static_index, front.size()));
  }
  SelectorParams p = selector;
  p.k_max = front.size();
  p.validate();
}

Cycles SimConfig::effective_export_cost() const {
  if (export_cost_per_flow) return *export_cost_per_flow;
  return static_cast<Cycles>(std::llround(cpu_hz / kFlowsExportedPerSecond));
}

RunReport simulate_run(const Trace& trace, const SimConfig& config, const ParetoFront& front,
                       const Catalog& catalog, const BatchSink& sink) {
  config.validate(front);
  if (trace.empty()) {
    RunReport report;
    report.label = config.mode.label();
    return report;
  }
  Engine engine(trace, config, front, catalog, sink);
  return engine.run();
}

SweepParameter parse_sweep_parameter(std::string_view name) {
  if (name == "mon_window" || name == "mon-window") return SweepParameter::mon_window;
  if (name == "dec_factor" || name == "dec-factor") return SweepParameter::dec_factor;
  throw ConfigError(
      fmt::format("unsupported sweep parameter '{}': expected mon_window or dec_factor", name));
}

std::string_view to_string(SweepParameter parameter) {
  return parameter == SweepParameter::mon_window ? "mon_window" : "dec_factor";
}

std::vector<SweepRow> sweep(const Trace& trace, const SimConfig& config, const ParetoFront& front,
                            const Catalog& catalog, SweepParameter parameter,
                            const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<SimConfig> configs;
  for (double v : values) {
    SimConfig c = config;
    if (parameter == SweepParameter::mon_window) {
      c.selector.mon_window = v;
    } else {
      c.selector.dec_factor = v;
    }
    c.validate(front);
    configs.push_back(c);
  }
  auto reports = run_parallel(configs, [&](const SimConfig& c) {
    return simulate_run(trace, c, front, catalog);
  });
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    rows.push_back({std::string(to_string(parameter)), values[i], reports[i].totals.loss_pct,
                    reports[i].accuracy});
  }
  return rows;
}

std::vector<SweepRow> sweep_mon_window(const Trace& trace, const SimConfig& config,
                                       const ParetoFront& front, const Catalog& catalog,
                                       const std::vector<double>& values) {
  return sweep(trace, config, front, catalog, SweepParameter::mon_window, values);
}

std::vector<ConfigResult> compare_static_vs_adaptive(const Trace& trace, const SimConfig& config,
                                                     const ParetoFront& front,
                                                     const Catalog& catalog) {
  std::vector<RunMode> modes;
  for (std::size_t i = 1; i <= front.size(); ++i) modes.push_back(RunMode::fixed(i));
  modes.push_back(RunMode::adaptive_mode());
  auto results = run_parallel(modes, [&](const RunMode& mode) {
    SimConfig c = config;
    c.mode = mode;
    const auto report = simulate_run(trace, c, front, catalog);
    ConfigResult r;
    r.mode = mode;
    r.model_accuracy = mode.adaptive ? std::numeric_limits<double>::quiet_NaN()
                                     : front.at(mode.static_index).accuracy;
    r.loss_pct = report.totals.loss_pct;
    r.dropped = report.totals.dropped;
    r.accuracy = report.accuracy;
    return r;
  });
  return results;
}

std::size_t accuracy_matched_index(const ParetoFront& front, double adaptive_median) {
  std::size_t best = 1;
  for (std::size_t i = 1; i <= front.size(); ++i) {
    if (front.at(i).accuracy <= adaptive_median + 1e-12) best = i;
  }
  return best;
}

}  // namespace loadshift
