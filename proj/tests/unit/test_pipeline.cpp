#include <doctest.h>

#include "loadshift/error.hpp"
#include "loadshift/pipeline.hpp"

using namespace loadshift;

namespace {

Catalog make_catalog(std::optional<std::uint32_t> first_n = std::nullopt) {
  Catalog c;
  c.name = "t";
  c.base_packet_cost = 10;
  c.first_n_packets = first_n;
  c.features = {{0, "count", 5, FeatureKind::counter},
                {1, "gap", 20, FeatureKind::latency},
                {2, "seg", 100, FeatureKind::segment}};
  c.accuracy_map = {{0b001, 0.5}, {0b011, 0.7}, {0b111, 0.9}};
  return c;
}

ParetoFront make_front() {
  return ParetoFront({{FeatureMask(0b001), 5, 0.5},
                      {FeatureMask(0b011), 25, 0.7},
                      {FeatureMask(0b111), 125, 0.9}});
}

PacketRecord pkt(std::uint32_t flow, Nanos ts, bool forward = true, std::uint8_t proto = kProtoTcp) {
  PacketRecord p;
  p.ts_ns = ts;
  p.src_ip = forward ? 0x0a000000 + flow : 0xc0a80001;
  p.dst_ip = forward ? 0xc0a80001 : 0x0a000000 + flow;
  p.src_port = forward ? 40000 : 443;
  p.dst_port = forward ? 443 : 40000;
  p.proto = proto;
  p.size = 300;
  p.tcp_flags = kTcpAck;
  return p;
}

constexpr Nanos kSec = 1'000'000'000;

}  // namespace

TEST_CASE("flows keep the feature set selected at their first packet") {
  const auto catalog = make_catalog();
  const auto front = make_front();
  Pipeline pl(catalog, front, {});
  const WorkerId w = *pl.route(pkt(1, 0));
  CHECK(pl.process_packet(w, pkt(1, 0)) == 15);
  pl.selection().publish(3);
  CHECK(pl.process_packet(w, pkt(1, 1, false)) == 15);  // still pinned to m1
  CHECK(pl.process_packet(w, pkt(2, 2)) == 135);         // new flow gets m3
  const auto key1 = *canonical_flow_key(pkt(1, 0));
  const auto* rec = pl.worker(w).find(key1);
  REQUIRE(rec);
  CHECK(rec->pinned_index == 1);
  CHECK(rec->packets_a == 1);
  CHECK(rec->packets_b == 1);
  CHECK(rec->features.size() == 1);
}

TEST_CASE("pins survive an export and expire after the idle timeout") {
  const auto catalog = make_catalog();
  const auto front = make_front();
  PipelineSettings settings;
  settings.flow_idle_timeout_ns = 10 * kSec;
  Pipeline pl(catalog, front, settings);
  const WorkerId first = pl.table().active();
  pl.process_packet(first, pkt(1, 0));

  pl.selection().publish(2);
  pl.begin_export(first);
  const WorkerId second = pl.table().active();
  CHECK(second != first);
  CHECK(*pl.route(pkt(1, kSec)) == second);
  const auto batch = pl.complete_export(first, 0, kSec);
  CHECK(batch.flows.size() == 1);
  CHECK(pl.worker(first).role() == WorkerRole::backup);

  // Same flow on the new worker: still m1.
  CHECK(pl.process_packet(second, pkt(1, 2 * kSec)) == 15);
  // Idle past the timeout: repinned to the current selection.
  CHECK(pl.process_packet(second, pkt(1, 13 * kSec)) == 35);

  pl.expire_pins(30 * kSec);
  CHECK(pl.pinned_flows() == 0);
}

TEST_CASE("past first_n packets only the base cost is charged") {
  const auto catalog = make_catalog(3);
  const auto front = make_front();
  Pipeline pl(catalog, front, {});
  pl.selection().publish(3);
  const WorkerId w = pl.table().active();
  for (int i = 0; i < 3; ++i) CHECK(pl.process_packet(w, pkt(1, i)) == 135);
  CHECK(pl.process_packet(w, pkt(1, 3)) == 10);
  CHECK(pl.process_packet(w, pkt(1, 4)) == 10);
  CHECK(pl.worker(w).find(*canonical_flow_key(pkt(1, 0)))->packets() == 3);
  CHECK(pl.settings().tuning.raw_header_limit == 3);
}

TEST_CASE("full flow table evicts the least recently seen flow") {
  const auto catalog = make_catalog();
  const auto front = make_front();
  PipelineSettings settings;
  settings.flow_table_capacity = 2;
  Pipeline pl(catalog, front, settings);
  const WorkerId w = pl.table().active();
  pl.process_packet(w, pkt(1, 0));
  pl.process_packet(w, pkt(2, 1));
  pl.process_packet(w, pkt(1, 2));  // flow 2 is now the oldest
  pl.process_packet(w, pkt(3, 3));
  CHECK(pl.evictions() == 1);
  CHECK(pl.worker(w).find(*canonical_flow_key(pkt(2, 0))) == nullptr);
  CHECK(pl.worker(w).find(*canonical_flow_key(pkt(1, 0))) != nullptr);
  CHECK(pl.worker(w).flow_count() == 2);
  CHECK(pl.flows_created() == 3);
}

TEST_CASE("export role transitions are checked") {
  const auto catalog = make_catalog();
  const auto front = make_front();
  Pipeline pl(catalog, front, {});
  const WorkerId a = pl.table().active();
  const WorkerId b = pl.companion(a);
  CHECK_THROWS_AS(pl.begin_export(b), PipelineError);
  pl.begin_export(a);
  CHECK_THROWS_AS(pl.begin_export(b), PipelineError);  // companion is busy exporting
  CHECK_THROWS_AS(pl.finish_export(b), PipelineError);
  pl.finish_export(a);
  pl.begin_export(b);
  CHECK(pl.table().active() == a);
  for (std::size_t i = 0; i < pl.table().size(); ++i) CHECK(pl.table().worker_at(i) == a);
}

TEST_CASE("untracked packets bypass the workers") {
  const auto catalog = make_catalog();
  const auto front = make_front();
  Pipeline pl(catalog, front, {});
  CHECK_FALSE(pl.route(pkt(1, 0, true, 1)));
  CHECK(pl.bypassed() == 1);
  CHECK_THROWS_AS(pl.process_packet(0, pkt(1, 0, true, 1)), PipelineError);
}

TEST_CASE("export cost is charged per flow") {
  const auto catalog = make_catalog();
  const auto front = make_front();
  PipelineSettings settings;
  settings.export_cost_per_flow = 1000;
  Pipeline pl(catalog, front, settings);
  const WorkerId w = pl.table().active();
  for (std::uint32_t f = 0; f < 4; ++f) pl.process_packet(w, pkt(f, f));
  const Cycles before = pl.worker(w).cycles_consumed();
  const auto batch = pl.drain_for_export(w, 0, 1);
  CHECK(batch.export_cycles == 4000);
  CHECK(pl.worker(w).cycles_consumed() - before == 4000);
  CHECK(pl.worker(w).flow_count() == 0);
}

TEST_CASE("post-processing summarizes each flow, sorted by key") {
  const auto catalog = make_catalog();
  const auto front = make_front();
  Pipeline pl(catalog, front, {});
  pl.selection().publish(2);
  const WorkerId w = pl.table().active();
  pl.process_packet(w, pkt(5, 0));
  pl.process_packet(w, pkt(5, 1'000'000, false));
  pl.process_packet(w, pkt(5, 4'000'000));
  pl.process_packet(w, pkt(2, 10));
  const auto batch = pl.drain_for_export(w, 0, kSec);
  const auto rows = post_process(batch, catalog);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].key < rows[1].key);
  const auto& r = rows[0].key == *canonical_flow_key(pkt(2, 0)) ? rows[1] : rows[0];
  CHECK(r.packets_a + r.packets_b == 3);
  CHECK(r.duration_ns == 4'000'000);
  REQUIRE(r.features.size() == 2);
  CHECK(r.features[1].feature == "gap");
  const auto& gaps = r.features[1].series.at(0).second;
  CHECK(gaps.count == 2);
  CHECK(gaps.min == doctest::Approx(1000.0));
  CHECK(gaps.max == doctest::Approx(3000.0));
  CHECK(gaps.mean == doctest::Approx(2000.0));
  CHECK(gaps.stdev == doctest::Approx(1000.0));
}
