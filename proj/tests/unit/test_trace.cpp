#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "loadshift/error.hpp"
#include "loadshift/trace.hpp"
#include "../support/oracles.hpp"

using namespace loadshift;

namespace {

Trace at_times(std::initializer_list<Nanos> ts, Nanos duration) {
  Trace t;
  for (Nanos x : ts) {
    PacketRecord p;
    p.ts_ns = x;
    p.src_ip = 1;
    p.dst_ip = 2;
    p.src_port = 3;
    p.dst_port = 4;
    p.proto = kProtoTcp;
    p.size = 100;
    t.packets.push_back(p);
  }
  t.duration_ns = duration;
  return t;
}

std::vector<Nanos> times(const Trace& t) {
  std::vector<Nanos> out;
  for (const auto& p : t.packets) out.push_back(p.ts_ns);
  return out;
}

SyntheticProfile profile(double seconds, double pps, std::uint64_t seed = 1) {
  SyntheticProfile p;
  p.duration_s = seconds;
  p.target_pps = pps;
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("doubling the rate halves the gaps") {
  const auto t = at_times({0, 10'000, 20'000}, 30'000);
  CHECK(times(scale_trace(t, 2.0)) == std::vector<Nanos>{0, 5'000, 10'000});
  CHECK(scale_trace(t, 2.0).duration_ns == 15'000);
  CHECK(scale_trace(t, 1.0) == t);
  CHECK_THROWS_AS(scale_trace(t, 0.0), TraceError);
  CHECK_THROWS_AS(scale_trace(t, -1.0), TraceError);
}

TEST_CASE("scaling composes up to nanosecond rounding") {
  std::mt19937_64 rng(4);
  const Trace t = generate_synthetic(profile(2.0, 2000));
  for (int trial = 0; trial < 20; ++trial) {
    const double a = 0.1 + static_cast<double>(rng() % 300) / 100.0;
    const double b = 0.1 + static_cast<double>(rng() % 300) / 100.0;
    const auto twice = scale_trace(scale_trace(t, a), b);
    const auto once = scale_trace(t, a * b);
    REQUIRE(twice.size() == once.size());
    // The first rounding (at most 0.5 ns) is stretched by 1 / b, the second adds 0.5 ns.
    const auto bound = static_cast<long long>(std::ceil(0.5 / b + 0.5));
    for (std::size_t i = 0; i < once.size(); ++i) {
      CHECK(std::llabs(twice.packets[i].ts_ns - once.packets[i].ts_ns) <= bound);
    }
  }
}

TEST_CASE("scaling a 1 Mpps trace by 0.2 yields 0.2 Mpps") {
  const Trace base = generate_synthetic(profile(1.0, 1e6, 8));
  const Trace night = scale_trace(base, 0.2);
  const double rate = measured_rate(night, 0, night.duration_ns);
  CHECK(rate == doctest::Approx(0.2e6).epsilon(0.01));
}

TEST_CASE("concatenated phases follow each other") {
  const auto a = at_times({0, 100}, 600);
  const auto b = at_times({0, 50, 599}, 600);
  const auto c = concat_phases({a, b});
  CHECK(times(c) == std::vector<Nanos>{0, 100, 600, 650, 1199});
  CHECK(c.duration_ns == 1200);
  CHECK(c.size() == a.size() + b.size());
  CHECK(concat_phases({}).empty());
}

TEST_CASE("three-phase composition keeps the per-phase rates") {
  const double base = 4000;
  std::vector<Trace> phases;
  const std::vector<double> factors{1.0, 1.6, 0.2};
  for (std::size_t i = 0; i < factors.size(); ++i) {
    phases.push_back(scale_trace(generate_synthetic(profile(20.0 * factors[i], base, 20 + i)),
                                 factors[i]));
  }
  const Trace all = concat_phases(phases);
  CHECK(all.duration_ns == 60 * kNanosPerSecond);
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const Nanos from = static_cast<Nanos>(i) * 20 * kNanosPerSecond;
    const double rate = measured_rate(all, from, from + 20 * kNanosPerSecond);
    CAPTURE(i);
    CHECK(rate == doctest::Approx(base * factors[i]).epsilon(0.03));
  }
}

TEST_CASE("synthetic generation hits the target rate and is deterministic") {
  const Trace t = generate_synthetic(profile(60.0, 10'000));
  CHECK(static_cast<double>(t.size()) == doctest::Approx(600'000).epsilon(0.02));
  CHECK_NOTHROW(t.validate());
  CHECK(t.duration_ns == 60 * kNanosPerSecond);
  const Trace again = generate_synthetic(profile(60.0, 10'000));
  CHECK(serialize_trace(again) == serialize_trace(t));
  CHECK(generate_synthetic(profile(5.0, 1000, 2)) != generate_synthetic(profile(5.0, 1000, 3)));
}

TEST_CASE("flow sizes follow the bounded Pareto law") {
  FlowSizeDistribution d;
  std::mt19937_64 rng(12);
  std::vector<double> sample(100'000);
  for (auto& x : sample) x = d.sample(rng);
  const double ks = oracle::ks_statistic(sample, [&](double x) {
    return oracle::bounded_pareto_cdf(x, d.shape, d.min_packets, d.max_packets);
  });
  CHECK(ks < 0.02);
  // Mean by numeric integration of the survival function.
  double integral = d.min_packets;
  const int steps = 2'000'000;
  const double lo = std::log(d.min_packets);
  const double hi = std::log(d.max_packets);
  for (int i = 0; i < steps; ++i) {
    const double x = std::exp(lo + (hi - lo) * (i + 0.5) / steps);
    integral += (1.0 - oracle::bounded_pareto_cdf(x, d.shape, d.min_packets, d.max_packets)) * x *
                (hi - lo) / steps;
  }
  CHECK(d.mean() == doctest::Approx(integral).epsilon(1e-4));
}

TEST_CASE("capture gaps leave holes of about a second") {
  auto p = profile(120.0, 2000, 5);
  p.gaps_per_minute = 2.0;
  const Trace t = generate_synthetic(p);
  Nanos longest = 0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    longest = std::max(longest, t.packets[i].ts_ns - t.packets[i - 1].ts_ns);
  }
  CHECK(longest > 700'000'000);
  CHECK(longest < 1'500'000'000);
}

TEST_CASE("untracked share is honoured") {
  auto p = profile(10.0, 5000, 6);
  p.untracked_fraction = 0.1;
  const Trace t = generate_synthetic(p);
  std::size_t icmp = 0;
  for (const auto& pkt : t.packets) icmp += pkt.proto != kProtoTcp && pkt.proto != kProtoUdp;
  CHECK(static_cast<double>(icmp) / static_cast<double>(t.size()) ==
        doctest::Approx(0.1).epsilon(0.1));
}

TEST_CASE("CSV round-trip and validation") {
  const Trace t = generate_synthetic(profile(2.0, 500, 9));
  CHECK(parse_trace(serialize_trace(t)) == t);

  const auto path = std::filesystem::temp_directory_path() / "loadshift_trace_roundtrip.csv";
  write_trace(t, path);
  CHECK(load_trace(path) == t);
  std::filesystem::remove(path);

  const std::string header = std::string(kTraceHeader) + " duration_ns=1000\n" +
                             std::string(kTraceColumns) + "\n";
  CHECK(parse_trace(header).empty());
  CHECK_THROWS_AS(parse_trace(header + "10,1.1.1.1,2.2.2.2,1,2,6,60,16\n"
                                        "5,1.1.1.1,2.2.2.2,1,2,6,60,16\n"),
                  TraceError);
  try {
    parse_trace(header + "10,1.1.1.1,2.2.2.2,1,2,6,60,16\n10,bad,2.2.2.2,1,2,6,60,16\n");
    FAIL("expected an error");
  } catch (const TraceError& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  CHECK_THROWS_AS(load_trace("/nonexistent/trace.csv"), TraceError);
}
