#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <list>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "loadshift/catalog.hpp"
#include "loadshift/features.hpp"
#include "loadshift/flow_key.hpp"
#include "loadshift/packet.hpp"
#include "loadshift/selector.hpp"
#include "loadshift/stats.hpp"

namespace loadshift {

using WorkerId = std::uint32_t;

enum class WorkerRole { active, backup, exporting };

std::string_view to_string(WorkerRole role);

struct FlowRecord {
  FlowKey key;
  FeatureMask pinned_mask;
  std::size_t pinned_index = 0;
  std::uint64_t packets_a = 0;  // sent by the key's endpoint a
  std::uint64_t packets_b = 0;
  std::uint64_t bytes_a = 0;
  std::uint64_t bytes_b = 0;
  Nanos first_seen = 0;
  Nanos last_seen = 0;
  std::vector<FeatureAccumulator> features;  // one per pinned feature, ascending id

  std::uint64_t packets() const { return packets_a + packets_b; }
};

// Maps flow hashes to workers. Repointing replaces every bucket at once.
class IndirectionTable {
 public:
  static constexpr std::size_t kDefaultBuckets = 128;

  IndirectionTable(std::size_t buckets, WorkerId active, WorkerId backup);

  std::size_t size() const { return buckets_.size(); }
  std::size_t bucket_of(const FlowKey& key) const;
  WorkerId worker_at(std::size_t bucket) const { return buckets_.at(bucket); }
  WorkerId active() const { return active_; }
  WorkerId backup() const { return backup_; }

  // Points every bucket at the current backup and swaps the two roles.
  void swap_to_backup();

 private:
  std::vector<WorkerId> buckets_;
  WorkerId active_;
  WorkerId backup_;
};

WorkerId route_packet(const IndirectionTable& table, const FlowKey& key);

struct ExportBatch {
  WorkerId worker = 0;
  std::uint64_t window_id = 0;
  Nanos window_start = 0;
  Nanos window_end = 0;
  std::vector<FlowRecord> flows;
  Cycles export_cycles = 0;
};

struct SwapEvent {
  WorkerId exporting = 0;
  WorkerId now_active = 0;
};

struct PipelineSettings {
  std::optional<std::uint32_t> first_n_packets;
  std::size_t flow_table_capacity = 1u << 20;  // per worker
  Cycles export_cost_per_flow = 0;
  Nanos flow_idle_timeout_ns = 120'000'000'000;
  std::size_t indirection_buckets = IndirectionTable::kDefaultBuckets;
  ExtractorTuning tuning;
};

// Flow table plus counters for one worker core.
class Worker {
 public:
  Worker(WorkerId id, WorkerRole role) : id_(id), role_(role) {}

  WorkerId id() const { return id_; }
  WorkerRole role() const { return role_; }
  void set_role(WorkerRole role) { role_ = role; }

  std::size_t flow_count() const { return table_.size(); }
  const FlowRecord* find(const FlowKey& key) const;
  Cycles cycles_consumed() const { return cycles_; }
  std::uint64_t evictions() const { return evictions_; }
  std::uint64_t flows_created() const { return created_; }

  // Creates a record (evicting the least recently seen one when full) or
  // returns the existing one, marking it as most recently seen.
  FlowRecord& touch(const FlowKey& key, Nanos now, std::size_t capacity, bool& created);
  std::vector<FlowRecord> drain();
  void charge(Cycles cycles) { cycles_ += cycles; }

 private:
  struct Entry {
    FlowRecord record;
    std::list<FlowKey>::iterator lru;
  };

  WorkerId id_;
  WorkerRole role_;
  std::unordered_map<FlowKey, Entry, FlowKeyHash> table_;
  std::list<FlowKey> lru_;  // front = oldest idle
  Cycles cycles_ = 0;
  std::uint64_t evictions_ = 0;
  std::uint64_t created_ = 0;
};

// One active worker, its backup companion, the indirection table between
// them, and the per-flow feature-set pins that survive exports.
class Pipeline {
 public:
  static constexpr WorkerId kFirstWorker = 0;
  static constexpr WorkerId kSecondWorker = 1;

  Pipeline(const Catalog& catalog, const ParetoFront& front, PipelineSettings settings);

  const IndirectionTable& table() const { return table_; }
  const Worker& worker(WorkerId id) const { return workers_.at(id); }
  WorkerId companion(WorkerId id) const { return id == kFirstWorker ? kSecondWorker : kFirstWorker; }
  PublishedIndex& selection() { return selection_; }
  const PipelineSettings& settings() const { return settings_; }

  // nullopt for packets that bypass the workers (untracked protocol).
  std::optional<WorkerId> route(const PacketRecord& packet) const;

  // Runs the worker's per-packet logic and returns the cycles it costs:
  // base_packet_cost plus the unit costs of the flow's pinned features, or the
  // base cost alone once the flow is past first_n_packets.
  Cycles process_packet(WorkerId worker, const PacketRecord& packet);

  // Repoints the table at the companion, which becomes active; the worker
  // becomes the exporter. Throws PipelineError unless the worker is active and
  // the companion is an idle backup.
  SwapEvent begin_export(WorkerId worker);

  // Empties the worker's flow table into a batch and charges
  // export_cost_per_flow per flow. The worker keeps its role.
  ExportBatch drain_for_export(WorkerId worker, Nanos window_start, Nanos window_end);

  // exporting -> backup.
  void finish_export(WorkerId worker);

  // drain_for_export + finish_export.
  ExportBatch complete_export(WorkerId worker, Nanos window_start, Nanos window_end);

  std::uint64_t bypassed() const { return bypassed_; }
  std::uint64_t evictions() const;
  std::uint64_t flows_created() const;
  std::size_t pinned_flows() const { return pins_.size(); }

  // Forgets pins of flows idle longer than the timeout.
  void expire_pins(Nanos now);

 private:
  struct Pin {
    std::size_t index = 0;
    FeatureMask mask;
    Cycles cost = 0;
    std::uint64_t packets_seen = 0;
    Nanos last_seen = 0;
  };

  const Catalog& catalog_;
  const ParetoFront& front_;
  PipelineSettings settings_;
  IndirectionTable table_;
  std::array<Worker, 2> workers_;
  PublishedIndex selection_;
  std::unordered_map<FlowKey, Pin, FlowKeyHash> pins_;
  std::uint64_t next_window_ = 0;
  mutable std::uint64_t bypassed_ = 0;
};

struct FeatureSummary {
  std::string feature;  // catalog feature name
  std::vector<std::pair<std::string, SeriesSummary>> series;
  std::vector<std::pair<std::string, double>> scalars;
};

struct PostProcessedRecord {
  FlowKey key;
  std::size_t pinned_index = 0;
  std::uint64_t window_id = 0;
  WorkerId worker = 0;
  std::uint64_t packets_a = 0;
  std::uint64_t packets_b = 0;
  std::uint64_t bytes_a = 0;
  std::uint64_t bytes_b = 0;
  Nanos duration_ns = 0;
  std::vector<FeatureSummary> features;
};

// Statistical summary of every flow in the batch, sorted by flow key. Flows
// with no packets in the window are left out.
std::vector<PostProcessedRecord> post_process(const ExportBatch& batch, const Catalog& catalog);

}  // namespace loadshift
