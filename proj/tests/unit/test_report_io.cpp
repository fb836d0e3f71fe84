#include <doctest.h>

#include "loadshift/error.hpp"
#include "loadshift/report_io.hpp"

using namespace loadshift;

TEST_CASE("timeseries CSV round-trips") {
  std::vector<TimeSeriesPoint> series{
      {0, 100, 90, 10, 3, 1, 0.799, false},
      {1, 120, 120, 0, 0, 2, 0.9, true},
  };
  const auto text = timeseries_csv(series);
  CHECK(text.rfind("t,offered_pps,processed_pps,dropped,queue_depth,selected_index,accuracy,exporting\n", 0) == 0);
  CHECK(parse_timeseries_csv(text) == series);
  CHECK_THROWS_AS(parse_timeseries_csv("nope\n"), InputError);
  CHECK_THROWS_AS(parse_timeseries_csv(""), InputError);
  CHECK_THROWS_AS(parse_timeseries_csv(text + "1,2,3\n"), InputError);
}

TEST_CASE("report JSON round-trips totals and accuracy") {
  RunReport r;
  r.label = "static:2";
  r.totals.offered = 10;
  r.totals.injected = 9;
  r.totals.filtered = 1;
  r.totals.processed = 7;
  r.totals.dropped = 2;
  r.totals.loss_pct = 100.0 * 2 / 9;
  r.totals.exports = 3;
  r.accuracy = {0.9, 0.8, 0.95};
  const auto s = parse_report_json(report_json(r));
  CHECK(s.label == r.label);
  CHECK(s.totals == r.totals);
  CHECK(s.accuracy == r.accuracy);
  CHECK_THROWS_AS(parse_report_json("{}"), InputError);
  CHECK_THROWS_AS(parse_report_json("[1,"), InputError);
}

TEST_CASE("tables have fixed headers") {
  CHECK(switches_csv({{3.0, 6, 3, SwitchReason::drop}}) ==
        "time_s,old_index,new_index,reason\n3.000000,6,3,drop\n");
  CHECK(sweep_csv({{"mon_window", 8, 0.5, {0.9, 0.8, 0.95}}}) ==
        "parameter,value,loss_pct,accuracy_median,accuracy_q1,accuracy_q3\n"
        "mon_window,8,0.500000,0.900000,0.800000,0.950000\n");
}

TEST_CASE("feature lines carry a version") {
  PostProcessedRecord r;
  r.key = {1, 2, 3, 4, kProtoTcp};
  r.pinned_index = 2;
  FeatureSummary f;
  f.feature = "rtt";
  f.series.push_back({"gap_us", SeriesSummary{1, 2, 2, 3, 0.5, 4}});
  r.features.push_back(f);
  const auto text = features_jsonl({r, r});
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  CHECK(text.rfind("{\"version\":1,", 0) == 0);
  CHECK(text.find("\"rtt\":{\"gap_us\":{\"count\":4") != std::string::npos);
}
