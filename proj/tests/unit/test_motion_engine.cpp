#include <doctest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "alterforge/error.hpp"
#include "alterforge/motion_engine.hpp"
#include "oracles.hpp"

using namespace alterforge;

TEST_CASE("single move midpoint") {
  const MotionScript s{"m", {Move{1, 255, 1000}}};
  const auto trace = execute(s, neutral_pose());
  REQUIRE(trace.samples.size() == 11);
  CHECK(trace.samples[0].pose.at(1) == 64);
  CHECK(trace.samples[5].t_ms == 500);
  CHECK(trace.samples[5].pose.at(1) == 160);
  CHECK(trace.samples[10].pose.at(1) == 255);
  CHECK(trace.duration_ms() == 1000);
}

TEST_CASE("wait holds the pose") {
  const auto trace = execute(MotionScript{"w", {Wait{1000}}}, neutral_pose());
  REQUIRE(trace.samples.size() == 11);
  for (const auto& s : trace.samples) CHECK(s.pose == neutral_pose());
}

TEST_CASE("simultaneous moves change on the same ticks") {
  const MotionScript s{"pair", {SegmentStart{"both"}, Move{5, 200, 700}, Move{6, 10, 700}}};
  const auto trace = execute(s, neutral_pose());
  for (std::size_t i = 1; i < trace.samples.size(); ++i) {
    const bool moved5 = trace.samples[i].pose.at(5) != trace.samples[i - 1].pose.at(5);
    const bool moved6 = trace.samples[i].pose.at(6) != trace.samples[i - 1].pose.at(6);
    CHECK(moved5 == moved6);
  }
  const auto ref5 = oracle::axis_track(s, 5, 96, 100, trace.duration_ms());
  const auto ref6 = oracle::axis_track(s, 6, 64, 100, trace.duration_ms());
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    CHECK(trace.samples[i].pose.at(5) == ref5[i]);
    CHECK(trace.samples[i].pose.at(6) == ref6[i]);
  }
}

TEST_CASE("final sample is on the tick grid and reaches every target") {
  const MotionScript s{"odd", {Move{1, 0, 1050}, Move{2, 255, 130}}};
  for (int tick : {100, 120, 150}) {
    const auto trace = execute(s, neutral_pose(), EngineConfig{tick});
    const int total = 1180;
    CHECK(trace.samples.back().t_ms == ((total + tick - 1) / tick) * tick);
    CHECK(trace.samples.back().pose.at(1) == 0);
    CHECK(trace.samples.back().pose.at(2) == 255);
  }
}

TEST_CASE("batch engine equals the per-axis reference") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    const auto s = oracle::random_script(rng, i % 3 != 0, 25);
    const auto trace = execute(s, neutral_pose());
    for (int axis = 1; axis <= kAxisCount; ++axis) {
      const auto ref = oracle::axis_track(s, axis, neutral_pose().at(axis), 100, trace.duration_ms());
      REQUIRE(ref.size() == trace.samples.size());
      for (std::size_t k = 0; k < ref.size(); ++k) {
        if (trace.samples[k].pose.at(axis) != ref[k]) {
          FAIL_CHECK("axis " << axis << " at " << trace.samples[k].t_ms << " ms\n" << serialize(s));
          break;
        }
      }
    }
  }
}

TEST_CASE("segment events carry start times") {
  const MotionScript s{"e", {SegmentStart{"a"}, Move{1, 1, 300}, SegmentStart{"b"}, Wait{200}}};
  const auto trace = execute(s, neutral_pose());
  REQUIRE(trace.events.size() == 2);
  CHECK(trace.events[0] == TraceEvent{0, "a"});
  CHECK(trace.events[1] == TraceEvent{300, "b"});
}

TEST_CASE("engine rejects bad configuration and scripts") {
  const MotionScript ok{"ok", {Move{1, 1, 100}}};
  CHECK_THROWS_AS(execute(ok, neutral_pose(), EngineConfig{99}), Error);
  CHECK_THROWS_AS(execute(ok, neutral_pose(), EngineConfig{151}), Error);
  try {
    execute(MotionScript{"bad", {Move{50, 1, 100}}}, neutral_pose());
    FAIL("expected invalid_script");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_script);
  }
  MotionScript too_long{"long", {}};
  for (int i = 0; i < 6; ++i) too_long.steps.push_back(Wait{60000});
  try {
    execute(too_long, neutral_pose());
    FAIL("expected trace_too_long");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::trace_too_long);
  }
}

TEST_CASE("csv and json exports") {
  const auto trace = execute(MotionScript{"m", {Move{1, 255, 1000}}}, neutral_pose());
  const auto csv = trace_to_csv(trace);
  std::string header = "t_ms";
  for (int a = 1; a <= 43; ++a) header += ",axis_" + std::to_string(a);
  CHECK(csv.rfind(header + "\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 12);
  const auto j = trace_to_json(trace);
  CHECK(j["samples"].size() == 11);
  CHECK(j["samples"][5]["pose"][0] == 160);
  CHECK(j["tick_ms"] == 100);
}
