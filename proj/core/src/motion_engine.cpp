#include "alterforge/motion_engine.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include <nlohmann/json.hpp>

namespace alterforge {

void EngineConfig::validate() const {
  if (tick_ms < 100 || tick_ms > 150) {
    throw Error(Errc::invalid_argument, "tick_ms must be within 100..150, got " + std::to_string(tick_ms));
  }
}

namespace {

struct AxisRamp {
  std::size_t axis_index;
  int from;
  int to;
};

struct TimedBatch {
  int start_ms;
  int duration_ms;
  std::vector<AxisRamp> ramps;  // empty for waits
};

// Round-half-up of from + (to - from) * elapsed / duration in exact integers.
// The numerator is a convex combination of two bytes, so it is never negative.
int interpolate(int from, int to, long long elapsed, long long duration) {
  const long long num = static_cast<long long>(from) * duration + (to - from) * elapsed;
  return static_cast<int>((2 * num + duration) / (2 * duration));
}

std::uint8_t clamp_value(int value, ClampPolicy policy) {
  if (value < 0 || value > 255) {
    if (policy == ClampPolicy::reject) {
      throw Error(Errc::value_range, "interpolated value " + std::to_string(value) + " outside 0..255");
    }
    value = std::clamp(value, 0, 255);
  }
  return static_cast<std::uint8_t>(value);
}

}  // namespace

Trace execute(const MotionScript& script, const Pose& start, const EngineConfig& config, BodyTable table) {
  config.validate();
  const int total = total_duration_ms(script);
  if (total > kMaxScriptDurationMs) {
    throw Error(Errc::trace_too_long, "script runs " + format_duration(total) + " s; the limit is 300 s");
  }
  const auto issues = validate(script, table);
  if (has_errors(issues)) {
    std::string message = "script failed validation:";
    for (const auto& issue : issues) {
      if (issue.severity == Severity::error) message += " [" + std::string(to_string(issue.kind)) + "] " + issue.message;
    }
    throw Error(Errc::invalid_script, message);
  }

  // Resolve each batch's ramps against the values left by earlier batches.
  std::array<int, kAxisCount> level{};
  for (std::size_t i = 0; i < level.size(); ++i) level[i] = start.values()[i];
  std::vector<TimedBatch> timeline;
  for (const auto& batch : plan_batches(script)) {
    TimedBatch timed{batch.start_ms, batch.duration_ms, {}};
    if (batch.kind == Batch::Kind::moves) {
      std::array<int, kAxisCount> target{};
      std::array<bool, kAxisCount> touched{};
      for (std::size_t s = batch.first_step; s < batch.end_step; ++s) {
        const auto& move = std::get<Move>(script.steps[s]);
        const auto index = AxisId(move.axis).index();
        target[index] = move.target;  // last one wins
        touched[index] = true;
      }
      for (std::size_t a = 0; a < kAxisCount; ++a) {
        if (!touched[a]) continue;
        timed.ramps.push_back(AxisRamp{a, level[a], target[a]});
        level[a] = target[a];
      }
    }
    timeline.push_back(std::move(timed));
  }

  Trace trace;
  trace.tick_ms = config.tick_ms;
  for (const auto& mark : segment_marks(script)) trace.events.push_back(TraceEvent{mark.start_ms, mark.label});

  const int tick = config.tick_ms;
  const int end_ms = ((total + tick - 1) / tick) * tick;
  trace.samples.reserve(static_cast<std::size_t>(end_ms / tick) + 1);

  std::array<int, kAxisCount> settled{};
  for (std::size_t i = 0; i < settled.size(); ++i) settled[i] = start.values()[i];
  std::size_t next = 0;  // first batch not yet fully applied to `settled`
  for (int t = 0; t <= end_ms; t += tick) {
    while (next < timeline.size() && timeline[next].start_ms + timeline[next].duration_ms <= t) {
      for (const auto& ramp : timeline[next].ramps) settled[ramp.axis_index] = ramp.to;
      ++next;
    }
    std::array<int, kAxisCount> now = settled;
    if (next < timeline.size() && timeline[next].start_ms <= t) {
      const auto& active = timeline[next];
      for (const auto& ramp : active.ramps) {
        now[ramp.axis_index] = interpolate(ramp.from, ramp.to, t - active.start_ms, active.duration_ms);
      }
    }
    Pose pose;
    for (std::size_t a = 0; a < kAxisCount; ++a) {
      pose[AxisId(static_cast<int>(a) + 1)] = clamp_value(now[a], config.clamp_policy);
    }
    trace.samples.push_back(TraceSample{t, pose});
  }
  return trace;
}

std::string trace_to_csv(const Trace& trace) {
  std::ostringstream out;
  out << "t_ms";
  for (int a = 1; a <= kAxisCount; ++a) out << ",axis_" << a;
  out << '\n';
  for (const auto& sample : trace.samples) {
    out << sample.t_ms;
    for (auto v : sample.pose.values()) out << ',' << static_cast<int>(v);
    out << '\n';
  }
  return out.str();
}

nlohmann::json trace_to_json(const Trace& trace) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& sample : trace.samples) {
    samples.push_back({{"t_ms", sample.t_ms},
                       {"pose", std::vector<int>(sample.pose.values().begin(), sample.pose.values().end())}});
  }
  nlohmann::json events = nlohmann::json::array();
  for (const auto& event : trace.events) {
    events.push_back({{"t_ms", event.t_ms}, {"segment_label", event.segment_label}});
  }
  return {{"tick_ms", trace.tick_ms}, {"samples", std::move(samples)}, {"events", std::move(events)}};
}

}  // namespace alterforge
