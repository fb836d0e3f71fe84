#include "loadshift/features.hpp"

namespace loadshift {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr std::uint8_t kControlFlags = kTcpSyn | kTcpFin | kTcpRst;

void close_segment(SegmentState& s) {
  if (s.open_bytes == 0) return;
  s.sizes.push_back(static_cast<double>(s.open_bytes));
  s.open_bytes = 0;
}

}  // namespace

FeatureState make_state(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::counter: return CounterState{};
    case FeatureKind::throughput: return ThroughputState{};
    case FeatureKind::latency: return LatencyState{};
    case FeatureKind::retransmission: return RetransmissionState{};
    case FeatureKind::segment: return SegmentState{};
    case FeatureKind::raw_header: return RawHeaderState{};
  }
  return CounterState{};
}

void update_feature(FeatureState& state, const PacketRecord& packet, bool from_a,
                    const ExtractorTuning& tuning) {
  std::visit(
      overloaded{
          [&](CounterState& s) {
            if (from_a) {
              ++s.packets_a;
              s.bytes_a += packet.size;
            } else {
              ++s.packets_b;
              s.bytes_b += packet.size;
            }
          },
          [&](ThroughputState& s) {
            if (s.bin_start < 0) s.bin_start = packet.ts_ns;
            while (packet.ts_ns >= s.bin_start + tuning.throughput_bin_ns) {
              s.bytes_per_bin.push_back(static_cast<double>(s.bin_bytes));
              s.bin_bytes = 0;
              s.bin_start += tuning.throughput_bin_ns;
            }
            s.bin_bytes += packet.size;
          },
          [&](LatencyState& s) {
            if (s.last_ts >= 0 && s.last_from_a != from_a) {
              s.gaps_us.push_back(static_cast<double>(packet.ts_ns - s.last_ts) / 1e3);
            }
            s.last_ts = packet.ts_ns;
            s.last_from_a = from_a;
          },
          [&](RetransmissionState& s) {
            if (packet.proto != kProtoTcp) return;
            const std::uint8_t control = packet.tcp_flags & kControlFlags;
            auto& seen = from_a ? s.flags_seen_a : s.flags_seen_b;
            // A control flag seen again in the same direction is a resend.
            if ((control & seen) != 0) ++s.retransmissions;
            seen |= control;
          },
          [&](SegmentState& s) {
            if (packet.size < tuning.segment_min_packet) return;
            if (s.last_data_ts >= 0 && packet.ts_ns - s.last_data_ts > tuning.segment_gap_ns) {
              close_segment(s);
              s.intervals_ms.push_back(static_cast<double>(packet.ts_ns - s.segment_start) / 1e6);
              s.segment_start = packet.ts_ns;
            }
            if (s.segment_start < 0) s.segment_start = packet.ts_ns;
            s.open_bytes += packet.size;
            s.last_data_ts = packet.ts_ns;
          },
          [&](RawHeaderState& s) {
            if (s.first_ts < 0) s.first_ts = packet.ts_ns;
            if (s.headers.size() >= tuning.raw_header_limit) return;
            s.headers.push_back(
                {packet.ts_ns - s.first_ts, packet.size, packet.tcp_flags, from_a});
          },
      },
      state);
}

void finalize_feature(FeatureState& state) {
  if (auto* t = std::get_if<ThroughputState>(&state)) {
    if (t->bin_bytes > 0) {
      t->bytes_per_bin.push_back(static_cast<double>(t->bin_bytes));
      t->bin_bytes = 0;
    }
  } else if (auto* s = std::get_if<SegmentState>(&state)) {
    close_segment(*s);
  }
}

FeatureOutput feature_output(const FeatureState& state) {
  FeatureOutput out;
  std::visit(overloaded{
                 [&](const CounterState& s) {
                   out.scalars = {{"packets_a", static_cast<double>(s.packets_a)},
                                  {"packets_b", static_cast<double>(s.packets_b)},
                                  {"bytes_a", static_cast<double>(s.bytes_a)},
                                  {"bytes_b", static_cast<double>(s.bytes_b)}};
                 },
                 [&](const ThroughputState& s) {
                   out.series.emplace_back("bytes_per_s", s.bytes_per_bin);
                 },
                 [&](const LatencyState& s) { out.series.emplace_back("gap_us", s.gaps_us); },
                 [&](const RetransmissionState& s) {
                   out.scalars.emplace_back("retransmissions",
                                            static_cast<double>(s.retransmissions));
                 },
                 [&](const SegmentState& s) {
                   out.series.emplace_back("segment_bytes", s.sizes);
                   out.series.emplace_back("segment_interval_ms", s.intervals_ms);
                 },
                 [&](const RawHeaderState& s) {
                   std::vector<double> sizes;
                   sizes.reserve(s.headers.size());
                   for (const auto& h : s.headers) sizes.push_back(h.size);
                   out.series.emplace_back("header_size", std::move(sizes));
                   out.scalars.emplace_back("headers", static_cast<double>(s.headers.size()));
                 },
             },
             state);
  return out;
}

}  // namespace loadshift
