#include "loadshift/pipeline.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "loadshift/error.hpp"

namespace loadshift {

std::string_view to_string(WorkerRole role) {
  switch (role) {
    case WorkerRole::active: return "active";
    case WorkerRole::backup: return "backup";
    case WorkerRole::exporting: return "exporting";
  }
  return "unknown";
}

IndirectionTable::IndirectionTable(std::size_t buckets, WorkerId active, WorkerId backup)
    : buckets_(buckets, active), active_(active), backup_(backup) {
  if (buckets == 0) throw ConfigError("indirection table needs at least one bucket");
  if (active == backup) throw ConfigError("active and backup worker must differ");
}

std::size_t IndirectionTable::bucket_of(const FlowKey& key) const {
  return toeplitz_hash(key) % buckets_.size();
}

void IndirectionTable::swap_to_backup() {
  std::swap(active_, backup_);
  std::fill(buckets_.begin(), buckets_.end(), active_);
}

WorkerId route_packet(const IndirectionTable& table, const FlowKey& key) {
  return table.worker_at(table.bucket_of(key));
}

const FlowRecord* Worker::find(const FlowKey& key) const {
  const auto it = table_.find(key);
  return it == table_.end() ? nullptr : &it->second.record;
}

FlowRecord& Worker::touch(const FlowKey& key, Nanos now, std::size_t capacity, bool& created) {
  if (auto it = table_.find(key); it != table_.end()) {
    lru_.splice(lru_.end(), lru_, it->second.lru);
    created = false;
    return it->second.record;
  }
  if (table_.size() >= std::max<std::size_t>(capacity, 1)) {
    table_.erase(lru_.front());
    lru_.pop_front();
    ++evictions_;
  }
  lru_.push_back(key);
  auto [it, inserted] = table_.emplace(key, Entry{FlowRecord{}, std::prev(lru_.end())});
  (void)inserted;
  FlowRecord& rec = it->second.record;
  rec.key = key;
  rec.first_seen = now;
  rec.last_seen = now;
  created = true;
  ++created_;
  return rec;
}

std::vector<FlowRecord> Worker::drain() {
  std::vector<FlowRecord> out;
  out.reserve(table_.size());
  for (const auto& key : lru_) out.push_back(std::move(table_.at(key).record));
  table_.clear();
  lru_.clear();
  return out;
}

Pipeline::Pipeline(const Catalog& catalog, const ParetoFront& front, PipelineSettings settings)
    : catalog_(catalog),
      front_(front),
      settings_(settings),
      table_(settings.indirection_buckets, kFirstWorker, kSecondWorker),
      workers_{Worker(kFirstWorker, WorkerRole::active), Worker(kSecondWorker, WorkerRole::backup)},
      selection_(1) {
  if (front.empty()) throw ConfigError("pipeline needs a non-empty front");
  if (!settings_.first_n_packets && catalog.first_n_packets) {
    settings_.first_n_packets = catalog.first_n_packets;
  }
  settings_.tuning.raw_header_limit = settings_.first_n_packets.value_or(
      settings_.tuning.raw_header_limit);
}

std::optional<WorkerId> Pipeline::route(const PacketRecord& packet) const {
  const auto key = canonical_flow_key(packet);
  if (!key) {
    ++bypassed_;
    return std::nullopt;
  }
  return route_packet(table_, *key);
}

Cycles Pipeline::process_packet(WorkerId worker_id, const PacketRecord& packet) {
  const auto key = canonical_flow_key(packet);
  if (!key) throw PipelineError("process_packet called with an untracked packet");
  Worker& worker = workers_.at(worker_id);

  auto [pin_it, fresh] = pins_.try_emplace(*key);
  Pin& pin = pin_it->second;
  if (fresh || packet.ts_ns - pin.last_seen > settings_.flow_idle_timeout_ns) {
    // The feature set is fixed by whatever is selected at the flow's first packet.
    pin.index = std::clamp<std::size_t>(selection_.read(), 1, front_.size());
    pin.mask = front_.at(pin.index).mask;
    pin.cost = front_.at(pin.index).cost;
    pin.packets_seen = 0;
  }
  pin.last_seen = packet.ts_ns;
  ++pin.packets_seen;

  if (settings_.first_n_packets && pin.packets_seen > *settings_.first_n_packets) {
    worker.charge(catalog_.base_packet_cost);
    return catalog_.base_packet_cost;
  }

  bool created = false;
  FlowRecord& rec = worker.touch(*key, packet.ts_ns, settings_.flow_table_capacity, created);
  if (created) {
    rec.pinned_index = pin.index;
    rec.pinned_mask = pin.mask;
    for (auto id : pin.mask.ids()) {
      rec.features.push_back({id, make_state(catalog_.features[id].kind)});
    }
  }
  rec.last_seen = packet.ts_ns;
  const bool a = from_endpoint_a(packet, *key);
  if (a) {
    ++rec.packets_a;
    rec.bytes_a += packet.size;
  } else {
    ++rec.packets_b;
    rec.bytes_b += packet.size;
  }
  for (auto& acc : rec.features) update_feature(acc.state, packet, a, settings_.tuning);

  const Cycles cycles = catalog_.base_packet_cost + pin.cost;
  worker.charge(cycles);
  return cycles;
}

SwapEvent Pipeline::begin_export(WorkerId id) {
  Worker& w = workers_.at(id);
  Worker& mate = workers_.at(companion(id));
  if (w.role() != WorkerRole::active) {
    throw PipelineError(fmt::format("worker {} cannot export while {}", id, to_string(w.role())));
  }
  if (mate.role() != WorkerRole::backup) {
    throw PipelineError(fmt::format("worker {} cannot take over while {}", mate.id(),
                                    to_string(mate.role())));
  }
  table_.swap_to_backup();
  w.set_role(WorkerRole::exporting);
  mate.set_role(WorkerRole::active);
  return {id, mate.id()};
}

ExportBatch Pipeline::drain_for_export(WorkerId id, Nanos window_start, Nanos window_end) {
  Worker& w = workers_.at(id);
  ExportBatch batch;
  batch.worker = id;
  batch.window_id = next_window_++;
  batch.window_start = window_start;
  batch.window_end = window_end;
  batch.flows = w.drain();
  for (auto& rec : batch.flows) {
    for (auto& acc : rec.features) finalize_feature(acc.state);
  }
  batch.export_cycles = settings_.export_cost_per_flow * batch.flows.size();
  w.charge(batch.export_cycles);
  return batch;
}

void Pipeline::finish_export(WorkerId id) {
  Worker& w = workers_.at(id);
  if (w.role() != WorkerRole::exporting) {
    throw PipelineError(fmt::format("worker {} is not exporting", id));
  }
  w.set_role(WorkerRole::backup);
}

ExportBatch Pipeline::complete_export(WorkerId id, Nanos window_start, Nanos window_end) {
  if (workers_.at(id).role() != WorkerRole::exporting) {
    throw PipelineError(fmt::format("worker {} is not exporting", id));
  }
  auto batch = drain_for_export(id, window_start, window_end);
  finish_export(id);
  return batch;
}

std::uint64_t Pipeline::evictions() const {
  return workers_[0].evictions() + workers_[1].evictions();
}

std::uint64_t Pipeline::flows_created() const {
  return workers_[0].flows_created() + workers_[1].flows_created();
}

void Pipeline::expire_pins(Nanos now) {
  std::erase_if(pins_, [&](const auto& kv) {
    return now - kv.second.last_seen > settings_.flow_idle_timeout_ns;
  });
}

std::vector<PostProcessedRecord> post_process(const ExportBatch& batch, const Catalog& catalog) {
  std::vector<PostProcessedRecord> out;
  out.reserve(batch.flows.size());
  for (const auto& rec : batch.flows) {
    if (rec.packets() == 0) continue;
    PostProcessedRecord p;
    p.key = rec.key;
    p.pinned_index = rec.pinned_index;
    p.window_id = batch.window_id;
    p.worker = batch.worker;
    p.packets_a = rec.packets_a;
    p.packets_b = rec.packets_b;
    p.bytes_a = rec.bytes_a;
    p.bytes_b = rec.bytes_b;
    p.duration_ns = rec.last_seen - rec.first_seen;
    for (const auto& acc : rec.features) {
      FeatureState state = acc.state;
      finalize_feature(state);
      const auto output = feature_output(state);
      FeatureSummary fs;
      fs.feature = catalog.features.at(acc.feature_id).name;
      for (const auto& [name, values] : output.series) {
        fs.series.emplace_back(name, summarize(values));
      }
      fs.scalars = output.scalars;
      p.features.push_back(std::move(fs));
    }
    out.push_back(std::move(p));
  }
  std::sort(out.begin(), out.end(),
            [](const PostProcessedRecord& a, const PostProcessedRecord& b) { return a.key < b.key; });
  return out;
}

}  // namespace loadshift
