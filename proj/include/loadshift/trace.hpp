#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "loadshift/packet.hpp"

namespace loadshift {

inline constexpr Nanos kNanosPerSecond = 1'000'000'000;

// A packet capture: header records in non-decreasing timestamp order plus the
// nominal length of the capture window, which may extend past the last packet.
struct Trace {
  std::vector<PacketRecord> packets;
  Nanos duration_ns = 0;

  bool empty() const { return packets.empty(); }
  std::size_t size() const { return packets.size(); }
  // Throws TraceError if timestamps decrease or a packet lies past the end.
  void validate() const;

  bool operator==(const Trace&) const = default;
};

// Rate is multiplied by factor: every timestamp t becomes round(t / factor).
Trace scale_trace(const Trace& trace, double factor);

// Each trace starts where the previous one's window ends. No smoothing.
Trace concat_phases(const std::vector<Trace>& traces);

// Mean packets per second over [from, to).
double measured_rate(const Trace& trace, Nanos from, Nanos to);

struct FlowSizeDistribution {
  // Bounded Pareto over packet counts.
  double shape = 1.2;
  double min_packets = 2.0;
  double max_packets = 1e4;

  double cdf(double x) const;
  double sample(std::mt19937_64& rng) const;
  double mean() const;
};

struct SyntheticProfile {
  double duration_s = 60.0;
  double target_pps = 10'000.0;
  // <= 0 picks target_pps / mean flow size.
  double flow_arrival_rate = 0.0;
  FlowSizeDistribution flow_sizes;
  // Per-flow mean inter-packet gap is log-uniform in this range.
  double min_flow_gap_s = 0.001;
  double max_flow_gap_s = 0.05;
  double udp_fraction = 0.1;
  double untracked_fraction = 0.0;  // ICMP packets that bypass the pipeline
  // Capture holes of about a second, at this many per minute (0 disables).
  double gaps_per_minute = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

Trace generate_synthetic(const SyntheticProfile& profile);

inline constexpr std::string_view kTraceHeader = "# loadshift-trace v1";
inline constexpr std::string_view kTraceColumns =
    "ts_ns,src_ip,dst_ip,src_port,dst_port,proto,size,tcp_flags";

std::string serialize_trace(const Trace& trace);
void write_trace(const Trace& trace, const std::filesystem::path& path);
Trace parse_trace(std::string_view text);
Trace load_trace(const std::filesystem::path& path);

}  // namespace loadshift
