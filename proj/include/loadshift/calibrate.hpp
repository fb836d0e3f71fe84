#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loadshift/catalog.hpp"
#include "loadshift/trace.hpp"

namespace loadshift {

inline constexpr std::size_t kCalibrationMinPackets = 10'000;

// Monotonic cycle counter: the TSC on x86-64, otherwise steady_clock ticks
// scaled by nominal_hz.
class CycleCounter {
 public:
  explicit CycleCounter(double nominal_hz = 2e9) : nominal_hz_(nominal_hz) {}
  std::uint64_t now() const;
  static const char* source();

 private:
  double nominal_hz_;
};

struct CalibrationOptions {
  std::size_t batch_size = 1024;  // packets per timed batch
  std::size_t rounds = 5;         // passes over the trace per feature
};

struct FeatureCalibration {
  std::string name;
  FeatureKind kind = FeatureKind::counter;
  double median_cycles = 0.0;  // per packet
  double q1_cycles = 0.0;
  double q3_cycles = 0.0;
  std::size_t batches = 0;
};

struct CalibrationResult {
  std::vector<FeatureCalibration> features;  // catalog order
  double base_median_cycles = 0.0;           // flow key + hash per packet
  std::size_t packets = 0;
  bool low_confidence = false;  // fewer than kCalibrationMinPackets tracked packets
  std::string counter_source;
  Catalog calibrated;  // input catalog with measured unit and base costs
};

// Times every catalog feature's update routine over the trace's tracked
// packets. Throws InputError when no packet is tracked.
CalibrationResult calibrate(const Catalog& catalog, const Trace& sample,
                            const CalibrationOptions& options = {});

}  // namespace loadshift
