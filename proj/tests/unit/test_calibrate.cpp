#include <doctest.h>

#include "loadshift/calibrate.hpp"
#include "loadshift/error.hpp"

using namespace loadshift;

namespace {

Catalog two_features() {
  Catalog c;
  c.name = "cal";
  c.base_packet_cost = 1;
  c.features = {{0, "count", 1, FeatureKind::counter}, {1, "segments", 1, FeatureKind::segment}};
  c.accuracy_map = {{0b01, 0.5}, {0b11, 0.7}};
  return c;
}

Trace sample(double seconds, double pps) {
  SyntheticProfile p;
  p.duration_s = seconds;
  p.target_pps = pps;
  p.seed = 42;
  return generate_synthetic(p);
}

}  // namespace

TEST_CASE("a counter is cheaper to update than segment detection") {
  const auto result = calibrate(two_features(), sample(10.0, 5000), {1024, 9});
  REQUIRE(result.features.size() == 2);
  CHECK_FALSE(result.low_confidence);
  CHECK(result.features[0].median_cycles < result.features[1].median_cycles);
  CHECK(result.calibrated.features[0].unit_cost <= result.calibrated.features[1].unit_cost);
  CHECK(result.calibrated.accuracy_map == two_features().accuracy_map);
}

TEST_CASE("repeated calibration agrees within 20 percent") {
  const auto trace = sample(10.0, 5000);
  const auto a = calibrate(two_features(), trace, {1024, 9});
  const auto b = calibrate(two_features(), trace, {1024, 9});
  for (std::size_t i = 0; i < a.features.size(); ++i) {
    CAPTURE(a.features[i].name);
    const double lo = std::min(a.features[i].median_cycles, b.features[i].median_cycles);
    const double hi = std::max(a.features[i].median_cycles, b.features[i].median_cycles);
    CHECK(hi <= 1.2 * lo);
  }
}

TEST_CASE("small and empty traces") {
  const auto small = calibrate(two_features(), sample(1.0, 2000));
  CHECK(small.low_confidence);
  CHECK_THROWS_AS(calibrate(two_features(), Trace{}), InputError);
}
