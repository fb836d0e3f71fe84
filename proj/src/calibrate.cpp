#include "loadshift/calibrate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_map>

#if defined(__x86_64__) || defined(_M_X64)
#include <x86intrin.h>
#define LOADSHIFT_HAVE_TSC 1
#endif

#include "loadshift/error.hpp"
#include "loadshift/features.hpp"
#include "loadshift/flow_key.hpp"
#include "loadshift/stats.hpp"

namespace loadshift {

std::uint64_t CycleCounter::now() const {
#ifdef LOADSHIFT_HAVE_TSC
  return __rdtsc();
#else
  const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                      std::chrono::steady_clock::now().time_since_epoch())
                      .count();
  return static_cast<std::uint64_t>(static_cast<double>(ns) * nominal_hz_ / 1e9);
#endif
}

const char* CycleCounter::source() {
#ifdef LOADSHIFT_HAVE_TSC
  return "rdtsc";
#else
  return "steady_clock";
#endif
}

namespace {

struct Prepared {
  std::vector<const PacketRecord*> packets;
  std::vector<std::uint32_t> slot;  // dense flow id
  std::vector<std::uint8_t> from_a;
  std::size_t flows = 0;
};

Prepared prepare(const Trace& trace) {
  Prepared p;
  std::unordered_map<FlowKey, std::uint32_t, FlowKeyHash> ids;
  for (const auto& pkt : trace.packets) {
    const auto key = canonical_flow_key(pkt);
    if (!key) continue;
    const auto [it, fresh] = ids.try_emplace(*key, static_cast<std::uint32_t>(ids.size()));
    (void)fresh;
    p.packets.push_back(&pkt);
    p.slot.push_back(it->second);
    p.from_a.push_back(from_endpoint_a(pkt, *key) ? 1 : 0);
  }
  p.flows = ids.size();
  return p;
}

struct Quartiles {
  double q1, median, q3;
};

Quartiles quartiles(const std::vector<double>& v) {
  return {quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75)};
}

}  // namespace

CalibrationResult calibrate(const Catalog& catalog, const Trace& sample,
                            const CalibrationOptions& options) {
  if (options.batch_size == 0 || options.rounds == 0) {
    throw ConfigError("calibration needs a positive batch size and round count");
  }
  const Prepared prep = prepare(sample);
  if (prep.packets.empty()) throw InputError("calibration trace has no tracked packets");

  const CycleCounter counter;
  ExtractorTuning tuning;
  if (catalog.first_n_packets) tuning.raw_header_limit = *catalog.first_n_packets;

  CalibrationResult result;
  result.packets = prep.packets.size();
  result.low_confidence = prep.packets.size() < kCalibrationMinPackets;
  result.counter_source = CycleCounter::source();

  const std::size_t n = prep.packets.size();
  std::vector<double> per_packet;

  std::uint64_t sink = 0;
  for (std::size_t r = 0; r < options.rounds; ++r) {
    for (std::size_t start = 0; start < n; start += options.batch_size) {
      const std::size_t end = std::min(n, start + options.batch_size);
      const auto t0 = counter.now();
      for (std::size_t i = start; i < end; ++i) {
        const auto key = canonical_flow_key(*prep.packets[i]);
        sink += toeplitz_hash(*key);
      }
      const auto t1 = counter.now();
      per_packet.push_back(static_cast<double>(t1 - t0) / static_cast<double>(end - start));
    }
  }
  result.base_median_cycles = quartiles(per_packet).median;

  for (const auto& spec : catalog.features) {
    per_packet.clear();
    for (std::size_t r = 0; r < options.rounds; ++r) {
      std::vector<FeatureState> states(prep.flows, make_state(spec.kind));
      for (std::size_t start = 0; start < n; start += options.batch_size) {
        const std::size_t end = std::min(n, start + options.batch_size);
        const auto t0 = counter.now();
        for (std::size_t i = start; i < end; ++i) {
          update_feature(states[prep.slot[i]], *prep.packets[i], prep.from_a[i] != 0, tuning);
        }
        const auto t1 = counter.now();
        per_packet.push_back(static_cast<double>(t1 - t0) / static_cast<double>(end - start));
      }
      sink += states.size();
    }
    const auto q = quartiles(per_packet);
    result.features.push_back({spec.name, spec.kind, q.median, q.q1, q.q3, per_packet.size()});
  }
  // Keeps the base-cost loop from being optimized away.
  if (sink == 0xdeadbeefULL) result.counter_source += "*";

  result.calibrated = catalog;
  result.calibrated.base_packet_cost =
      std::max<Cycles>(1, static_cast<Cycles>(std::llround(result.base_median_cycles)));
  for (std::size_t i = 0; i < result.features.size(); ++i) {
    result.calibrated.features[i].unit_cost =
        std::max<Cycles>(1, static_cast<Cycles>(std::llround(result.features[i].median_cycles)));
  }
  return result;
}

}  // namespace loadshift
