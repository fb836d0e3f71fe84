#include "loadshift/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

#include <fmt/format.h>

#include "loadshift/error.hpp"
#include "loadshift/flow_key.hpp"

namespace loadshift {

namespace {

constexpr std::uint8_t kProtoIcmp = 1;

// Transforms are written out rather than taken from <random> distributions so
// that a seed produces the same trace with any standard library.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double exponential(std::mt19937_64& rng, double rate) {
  return -std::log1p(-uniform01(rng)) / rate;
}

std::uint32_t uniform_int(std::mt19937_64& rng, std::uint32_t lo, std::uint32_t hi) {
  return lo + static_cast<std::uint32_t>(uniform01(rng) * static_cast<double>(hi - lo + 1));
}

Nanos to_nanos(double seconds) { return static_cast<Nanos>(std::llround(seconds * 1e9)); }

struct SyntheticFlow {
  std::uint32_t client_ip = 0;
  std::uint32_t server_ip = 0;
  std::uint16_t client_port = 0;
  std::uint16_t server_port = 0;
  std::uint8_t proto = kProtoTcp;
  std::uint32_t size = 0;
  std::uint32_t sent = 0;
  double mean_gap_s = 0.0;
};

struct Due {
  double at = 0.0;
  std::uint64_t seq = 0;
  std::uint32_t flow = 0;

  bool operator>(const Due& o) const { return at != o.at ? at > o.at : seq > o.seq; }
};

PacketRecord emit(SyntheticFlow& f, Nanos ts, std::mt19937_64& rng) {
  PacketRecord p;
  p.ts_ns = ts;
  p.proto = f.proto;
  const std::uint32_t k = f.sent++;
  const bool last = f.sent == f.size;
  bool upstream = false;
  if (k == 0) {
    upstream = true;
  } else if (k == 1) {
    upstream = false;
  } else if (last) {
    upstream = true;
  } else {
    upstream = uniform01(rng) < 0.3;
  }

  if (upstream) {
    p.src_ip = f.client_ip;
    p.dst_ip = f.server_ip;
    p.src_port = f.client_port;
    p.dst_port = f.server_port;
  } else {
    p.src_ip = f.server_ip;
    p.dst_ip = f.client_ip;
    p.src_port = f.server_port;
    p.dst_port = f.client_port;
  }

  if (f.proto == kProtoTcp) {
    if (k == 0) {
      p.tcp_flags = kTcpSyn;
      p.size = 74;
    } else if (k == 1) {
      p.tcp_flags = kTcpSyn | kTcpAck;
      p.size = 74;
    } else if (last) {
      p.tcp_flags = kTcpFin | kTcpAck;
      p.size = 66;
    } else if (upstream) {
      p.tcp_flags = kTcpAck | (uniform01(rng) < 0.2 ? kTcpPsh : 0);
      p.size = static_cast<std::uint16_t>(uniform01(rng) < 0.8 ? 66 : uniform_int(rng, 100, 600));
    } else {
      p.tcp_flags = kTcpAck;
      p.size = static_cast<std::uint16_t>(uniform01(rng) < 0.85 ? 1500 : uniform_int(rng, 200, 1499));
    }
  } else {
    p.size = static_cast<std::uint16_t>(upstream ? uniform_int(rng, 60, 400)
                                                 : uniform_int(rng, 900, 1350));
  }
  return p;
}

}  // namespace

void Trace::validate() const {
  Nanos prev = 0;
  for (std::size_t i = 0; i < packets.size(); ++i) {
    const Nanos ts = packets[i].ts_ns;
    if (ts < prev) {
      throw TraceError(fmt::format("packet {} timestamp {} precedes {}", i, ts, prev));
    }
    prev = ts;
  }
  if (!packets.empty() && packets.back().ts_ns > duration_ns) {
    throw TraceError(fmt::format("last packet at {} ns lies beyond the trace duration {} ns",
                                 packets.back().ts_ns, duration_ns));
  }
}

Trace scale_trace(const Trace& trace, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw TraceError(fmt::format("scale factor must be positive (got {})", factor));
  }
  Trace out;
  out.packets = trace.packets;
  for (auto& p : out.packets) {
    p.ts_ns = static_cast<Nanos>(std::llround(static_cast<double>(p.ts_ns) / factor));
  }
  out.duration_ns = static_cast<Nanos>(std::llround(static_cast<double>(trace.duration_ns) / factor));
  if (!out.packets.empty()) out.duration_ns = std::max(out.duration_ns, out.packets.back().ts_ns);
  return out;
}

Trace concat_phases(const std::vector<Trace>& traces) {
  Trace out;
  std::size_t total = 0;
  for (const auto& t : traces) total += t.size();
  out.packets.reserve(total);
  Nanos offset = 0;
  for (const auto& t : traces) {
    for (auto p : t.packets) {
      p.ts_ns += offset;
      out.packets.push_back(p);
    }
    offset += t.duration_ns;
  }
  out.duration_ns = offset;
  return out;
}

double measured_rate(const Trace& trace, Nanos from, Nanos to) {
  if (to <= from) throw TraceError("measured_rate needs a non-empty interval");
  const auto lo = std::lower_bound(trace.packets.begin(), trace.packets.end(), from,
                                   [](const PacketRecord& p, Nanos t) { return p.ts_ns < t; });
  const auto hi = std::lower_bound(lo, trace.packets.end(), to,
                                   [](const PacketRecord& p, Nanos t) { return p.ts_ns < t; });
  return static_cast<double>(hi - lo) / (static_cast<double>(to - from) / 1e9);
}

double FlowSizeDistribution::cdf(double x) const {
  if (x <= min_packets) return 0.0;
  if (x >= max_packets) return 1.0;
  const double ratio = std::pow(min_packets / max_packets, shape);
  return (1.0 - std::pow(min_packets / x, shape)) / (1.0 - ratio);
}

double FlowSizeDistribution::sample(std::mt19937_64& rng) const {
  const double u = uniform01(rng);
  const double ratio = std::pow(min_packets / max_packets, shape);
  return min_packets / std::pow(1.0 - u * (1.0 - ratio), 1.0 / shape);
}

double FlowSizeDistribution::mean() const {
  const double a = shape;
  const double l = min_packets;
  const double h = max_packets;
  const double norm = 1.0 - std::pow(l / h, a);
  if (std::abs(a - 1.0) < 1e-12) return l * std::log(h / l) / norm;
  return std::pow(l, a) / norm * a / (a - 1.0) *
         (1.0 / std::pow(l, a - 1.0) - 1.0 / std::pow(h, a - 1.0));
}

void SyntheticProfile::validate() const {
  if (!(duration_s > 0.0)) throw TraceError("synthetic duration must be positive");
  if (!(target_pps > 0.0)) throw TraceError("synthetic target_pps must be positive");
  if (flow_arrival_rate < 0.0) throw TraceError("flow_arrival_rate must not be negative");
  if (!(flow_sizes.shape > 0.0) || !(flow_sizes.min_packets >= 1.0) ||
      !(flow_sizes.max_packets > flow_sizes.min_packets)) {
    throw TraceError("invalid flow size distribution");
  }
  if (!(min_flow_gap_s > 0.0) || !(max_flow_gap_s >= min_flow_gap_s)) {
    throw TraceError("invalid per-flow gap range");
  }
  if (udp_fraction < 0.0 || udp_fraction > 1.0 || untracked_fraction < 0.0 ||
      untracked_fraction > 1.0 || gaps_per_minute < 0.0) {
    throw TraceError("synthetic fractions must lie in [0, 1] and gap rate must be >= 0");
  }
}

Trace generate_synthetic(const SyntheticProfile& profile) {
  profile.validate();
  std::mt19937_64 rng(profile.seed);
  const double flow_rate = profile.flow_arrival_rate > 0.0
                               ? profile.flow_arrival_rate
                               : profile.target_pps / profile.flow_sizes.mean();

  std::vector<SyntheticFlow> flows;
  std::priority_queue<Due, std::vector<Due>, std::greater<>> due;
  std::uint64_t seq = 0;

  const double log_gap_lo = std::log(profile.min_flow_gap_s);
  const double log_gap_hi = std::log(profile.max_flow_gap_s);
  auto spawn = [&](double at) {
    SyntheticFlow f;
    f.client_ip = (10u << 24) | uniform_int(rng, 1, 0xfffffe);
    f.server_ip = (172u << 24) | (16u << 16) | uniform_int(rng, 1, 0xfffe);
    f.client_port = static_cast<std::uint16_t>(uniform_int(rng, 1024, 65535));
    f.proto = uniform01(rng) < profile.udp_fraction ? kProtoUdp : kProtoTcp;
    f.server_port = 443;
    f.size = static_cast<std::uint32_t>(std::floor(profile.flow_sizes.sample(rng)));
    f.mean_gap_s = std::exp(log_gap_lo + uniform01(rng) * (log_gap_hi - log_gap_lo));
    flows.push_back(f);
    due.push({at, seq++, static_cast<std::uint32_t>(flows.size() - 1)});
  };

  Trace out;
  out.duration_ns = to_nanos(profile.duration_s);
  out.packets.reserve(static_cast<std::size_t>(profile.target_pps * profile.duration_s * 1.01));

  double next_flow = exponential(rng, flow_rate);
  const double gap_rate = profile.gaps_per_minute / 60.0;
  double gap_start = gap_rate > 0.0 ? exponential(rng, gap_rate) : profile.duration_s + 1.0;
  double gap_end = gap_start + 0.8 + 0.4 * uniform01(rng);

  // Packet slots form a Poisson process at the target rate; each slot goes to
  // the flow that is most overdue, or to a fresh flow when none is due.
  for (double t = exponential(rng, profile.target_pps); t < profile.duration_s;
       t += exponential(rng, profile.target_pps)) {
    while (next_flow <= t) {
      spawn(next_flow);
      next_flow += exponential(rng, flow_rate);
    }
    if (t >= gap_end) {
      gap_start = gap_end + exponential(rng, gap_rate);
      gap_end = gap_start + 0.8 + 0.4 * uniform01(rng);
    }
    if (t >= gap_start) continue;

    const Nanos ts = std::min(to_nanos(t), out.duration_ns);
    if (profile.untracked_fraction > 0.0 && uniform01(rng) < profile.untracked_fraction) {
      PacketRecord p;
      p.ts_ns = ts;
      p.src_ip = (10u << 24) | uniform_int(rng, 1, 0xfffffe);
      p.dst_ip = (172u << 24) | (16u << 16) | uniform_int(rng, 1, 0xfffe);
      p.proto = kProtoIcmp;
      p.size = 98;
      out.packets.push_back(p);
      continue;
    }
    if (due.empty() || due.top().at > t) spawn(t);
    const Due next = due.top();
    due.pop();
    SyntheticFlow& f = flows[next.flow];
    out.packets.push_back(emit(f, ts, rng));
    if (f.sent < f.size) {
      due.push({std::max(next.at, t) + exponential(rng, 1.0 / f.mean_gap_s), seq++, next.flow});
    }
  }
  return out;
}

std::string serialize_trace(const Trace& trace) {
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "{} duration_ns={}\n{}\n", kTraceHeader,
                 trace.duration_ns, kTraceColumns);
  for (const auto& p : trace.packets) {
    fmt::format_to(std::back_inserter(buf), "{},{},{},{},{},{},{},{}\n", p.ts_ns,
                   format_ipv4(p.src_ip), format_ipv4(p.dst_ip), p.src_port, p.dst_port,
                   p.proto, p.size, p.tcp_flags);
  }
  return fmt::to_string(buf);
}

void write_trace(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceError(fmt::format("cannot write '{}'", path.string()));
  out << serialize_trace(trace);
}

Trace parse_trace(std::string_view text) {
  Trace trace;
  std::optional<Nanos> declared_duration;
  bool have_columns = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;

  auto fail = [&](std::string_view why) -> TraceError {
    return TraceError(fmt::format("line {}: {}", line_no, why));
  };

  while (pos < text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    if (line.front() == '#') {
      if (line.rfind("# loadshift-trace", 0) == 0) {
        if (line.rfind(kTraceHeader, 0) != 0) throw fail("unsupported trace version");
        const auto d = line.find("duration_ns=");
        if (d != std::string_view::npos) {
          Nanos value = 0;
          const auto digits = line.substr(d + 12);
          auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
          if (ec != std::errc{} || value < 0) throw fail("bad duration_ns");
          (void)p;
          declared_duration = value;
        }
      }
      continue;
    }
    if (!have_columns) {
      if (line != kTraceColumns) {
        throw fail(fmt::format("expected column header '{}'", kTraceColumns));
      }
      have_columns = true;
      continue;
    }

    std::array<std::string_view, 8> fields;
    std::size_t n = 0;
    std::size_t start = 0;
    while (n < fields.size()) {
      const auto comma = line.find(',', start);
      fields[n++] = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
      if (n == fields.size()) throw fail("too many fields");
    }
    if (n != fields.size()) throw fail(fmt::format("expected 8 fields, found {}", n));

    auto num = [&](std::string_view f, auto& out, std::string_view what) {
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), out);
      if (ec != std::errc{} || p != f.data() + f.size()) {
        throw fail(fmt::format("invalid {} '{}'", what, f));
      }
    };
    PacketRecord rec;
    unsigned proto = 0;
    unsigned flags = 0;
    unsigned sport = 0;
    unsigned dport = 0;
    unsigned size = 0;
    num(fields[0], rec.ts_ns, "ts_ns");
    const auto src = parse_ipv4(fields[1]);
    const auto dst = parse_ipv4(fields[2]);
    if (!src || !dst) throw fail("invalid IPv4 address");
    rec.src_ip = *src;
    rec.dst_ip = *dst;
    num(fields[3], sport, "src_port");
    num(fields[4], dport, "dst_port");
    num(fields[5], proto, "proto");
    num(fields[6], size, "size");
    num(fields[7], flags, "tcp_flags");
    if (rec.ts_ns < 0) throw fail("negative timestamp");
    if (sport > 65535 || dport > 65535) throw fail("port out of range");
    if (proto > 255 || flags > 255 || size > 65535) throw fail("field out of range");
    rec.src_port = static_cast<std::uint16_t>(sport);
    rec.dst_port = static_cast<std::uint16_t>(dport);
    rec.proto = static_cast<std::uint8_t>(proto);
    rec.size = static_cast<std::uint16_t>(size);
    rec.tcp_flags = static_cast<std::uint8_t>(flags);
    if (!trace.packets.empty() && rec.ts_ns < trace.packets.back().ts_ns) {
      throw fail(fmt::format("timestamp {} is earlier than the previous row", rec.ts_ns));
    }
    trace.packets.push_back(rec);
  }
  if (!have_columns) throw TraceError("trace has no column header");

  const Nanos last = trace.packets.empty() ? 0 : trace.packets.back().ts_ns;
  trace.duration_ns = declared_duration.value_or(last);
  trace.validate();
  return trace;
}

Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError(fmt::format("cannot open trace '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_trace(ss.str());
  } catch (const TraceError& e) {
    throw TraceError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace loadshift
