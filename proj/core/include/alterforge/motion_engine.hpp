#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "alterforge/body_model.hpp"
#include "alterforge/motion_script.hpp"

namespace alterforge {

enum class ClampPolicy { reject, saturate };

struct EngineConfig {
  int tick_ms = 100;  // the android refreshes every 100-150 ms
  ClampPolicy clamp_policy = ClampPolicy::saturate;

  void validate() const;  // throws invalid_argument
};

struct TraceSample {
  int t_ms;
  Pose pose;
  friend bool operator==(const TraceSample&, const TraceSample&) = default;
};

struct TraceEvent {
  int t_ms;
  std::string segment_label;
  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct Trace {
  int tick_ms = 100;
  std::vector<TraceSample> samples;  // t = 0, tick, 2*tick, ...
  std::vector<TraceEvent> events;    // segment starts, in script order

  int duration_ms() const { return samples.empty() ? 0 : samples.back().t_ms; }
  friend bool operator==(const Trace&, const Trace&) = default;
};

// Samples the script on a fixed tick. Each batch interpolates linearly from
// the axis value at batch start to the target, rounding half up; the final
// sample lands on ceil(total / tick) * tick where every target is reached.
//
// Throws invalid_script when validation reports errors and trace_too_long
// above 300 s.
Trace execute(const MotionScript& script, const Pose& start, const EngineConfig& config = {},
              BodyTable table = default_table());

// `t_ms,axis_1,...,axis_43` header followed by one row per sample.
std::string trace_to_csv(const Trace& trace);
nlohmann::json trace_to_json(const Trace& trace);

}  // namespace alterforge
