#include <doctest.h>

#include "loadshift/features.hpp"

using namespace loadshift;

namespace {

PacketRecord pkt(Nanos ts, std::uint16_t size, std::uint8_t flags = kTcpAck) {
  PacketRecord p;
  p.ts_ns = ts;
  p.proto = kProtoTcp;
  p.size = size;
  p.tcp_flags = flags;
  return p;
}

constexpr Nanos kMs = 1'000'000;

}  // namespace

TEST_CASE("counter splits by direction") {
  auto s = make_state(FeatureKind::counter);
  const ExtractorTuning t;
  update_feature(s, pkt(0, 100), true, t);
  update_feature(s, pkt(1, 40), false, t);
  update_feature(s, pkt(2, 60), true, t);
  const auto& c = std::get<CounterState>(s);
  CHECK(c.packets_a == 2);
  CHECK(c.bytes_a == 160);
  CHECK(c.packets_b == 1);
  CHECK(c.bytes_b == 40);
}

TEST_CASE("throughput bins include empty seconds") {
  auto s = make_state(FeatureKind::throughput);
  const ExtractorTuning t;
  update_feature(s, pkt(0, 100), true, t);
  update_feature(s, pkt(500 * kMs, 100), true, t);
  update_feature(s, pkt(2500 * kMs, 50), true, t);
  finalize_feature(s);
  finalize_feature(s);  // idempotent
  CHECK(std::get<ThroughputState>(s).bytes_per_bin == std::vector<double>{200, 0, 50});
}

TEST_CASE("latency records turnarounds only") {
  auto s = make_state(FeatureKind::latency);
  const ExtractorTuning t;
  update_feature(s, pkt(0, 60), true, t);
  update_feature(s, pkt(1 * kMs, 60), true, t);   // same direction
  update_feature(s, pkt(3 * kMs, 60), false, t);  // 2 ms turnaround
  update_feature(s, pkt(3 * kMs + 500'000, 60), true, t);
  CHECK(std::get<LatencyState>(s).gaps_us == std::vector<double>{2000, 500});
}

TEST_CASE("retransmission counts repeated control flags per direction") {
  auto s = make_state(FeatureKind::retransmission);
  const ExtractorTuning t;
  update_feature(s, pkt(0, 60, kTcpSyn), true, t);
  update_feature(s, pkt(1, 60, kTcpSyn | kTcpAck), false, t);  // other direction: fresh
  update_feature(s, pkt(2, 60, kTcpSyn), true, t);            // resent SYN
  update_feature(s, pkt(3, 60, kTcpFin), true, t);
  update_feature(s, pkt(4, 60, kTcpFin | kTcpAck), true, t);  // resent FIN
  CHECK(std::get<RetransmissionState>(s).retransmissions == 2);
}

TEST_CASE("segments split on idle gaps and ignore small packets") {
  auto s = make_state(FeatureKind::segment);
  const ExtractorTuning t;
  update_feature(s, pkt(0, 1000), false, t);
  update_feature(s, pkt(10 * kMs, 1000), false, t);
  update_feature(s, pkt(50 * kMs, 60), true, t);  // ACK, below the size floor
  update_feature(s, pkt(300 * kMs, 500), false, t);
  update_feature(s, pkt(350 * kMs, 500), false, t);
  finalize_feature(s);
  const auto& seg = std::get<SegmentState>(s);
  CHECK(seg.sizes == std::vector<double>{2000, 1000});
  CHECK(seg.intervals_ms == std::vector<double>{300});
}

TEST_CASE("raw headers stop at the limit") {
  auto s = make_state(FeatureKind::raw_header);
  ExtractorTuning t;
  t.raw_header_limit = 3;
  for (int i = 0; i < 5; ++i) update_feature(s, pkt(1000 + i * kMs, 100 + i), i % 2 == 0, t);
  const auto& r = std::get<RawHeaderState>(s);
  REQUIRE(r.headers.size() == 3);
  CHECK(r.headers[0] == HeaderSample{0, 100, kTcpAck, true});
  CHECK(r.headers[2].offset_ns == 2 * kMs);
}

TEST_CASE("feature outputs are named") {
  auto s = make_state(FeatureKind::segment);
  const auto out = feature_output(s);
  REQUIRE(out.series.size() == 2);
  CHECK(out.series[0].first == "segment_bytes");
  CHECK(out.series[1].first == "segment_interval_ms");
}
