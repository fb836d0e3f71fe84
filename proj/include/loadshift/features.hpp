#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "loadshift/catalog.hpp"
#include "loadshift/packet.hpp"

namespace loadshift {

// Per-flow state for one pinned feature. Which alternative is live depends on
// the feature kind; series-valued ones are summarized by the post-processor.

struct CounterState {
  std::uint64_t packets_a = 0;  // sent by endpoint a
  std::uint64_t packets_b = 0;
  std::uint64_t bytes_a = 0;
  std::uint64_t bytes_b = 0;
};

struct ThroughputState {
  Nanos bin_start = -1;
  std::uint64_t bin_bytes = 0;
  std::vector<double> bytes_per_bin;  // closed bins
};

struct LatencyState {
  Nanos last_ts = -1;
  bool last_from_a = false;
  std::vector<double> gaps_us;  // request/response turnaround samples
};

struct RetransmissionState {
  std::uint8_t flags_seen_a = 0;
  std::uint8_t flags_seen_b = 0;
  std::uint64_t retransmissions = 0;
};

struct SegmentState {
  Nanos last_data_ts = -1;
  Nanos segment_start = -1;
  std::uint64_t open_bytes = 0;
  std::vector<double> sizes;      // bytes per completed segment
  std::vector<double> intervals_ms;  // start-to-start gap between segments
};

struct HeaderSample {
  Nanos offset_ns = 0;  // since the flow's first packet
  std::uint16_t size = 0;
  std::uint8_t tcp_flags = 0;
  bool from_a = false;

  bool operator==(const HeaderSample&) const = default;
};

struct RawHeaderState {
  Nanos first_ts = -1;
  std::vector<HeaderSample> headers;
};

using FeatureState = std::variant<CounterState, ThroughputState, LatencyState,
                                  RetransmissionState, SegmentState, RawHeaderState>;

struct ExtractorTuning {
  Nanos throughput_bin_ns = 1'000'000'000;
  Nanos segment_gap_ns = 100'000'000;
  std::uint16_t segment_min_packet = 200;  // smaller packets are control/ACKs
  std::uint32_t raw_header_limit = 10;
};

struct FeatureAccumulator {
  unsigned feature_id = 0;
  FeatureState state;
};

FeatureState make_state(FeatureKind kind);

void update_feature(FeatureState& state, const PacketRecord& packet, bool from_a,
                    const ExtractorTuning& tuning);

// Moves any open bin or segment into the series. Idempotent.
void finalize_feature(FeatureState& state);

// Named numeric series / scalars a feature contributes to the export.
struct FeatureOutput {
  std::vector<std::pair<std::string, std::vector<double>>> series;
  std::vector<std::pair<std::string, double>> scalars;
};

FeatureOutput feature_output(const FeatureState& state);

}  // namespace loadshift
