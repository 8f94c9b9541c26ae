#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "alterforge/body_model.hpp"
#include "alterforge/error.hpp"

// Motion-script DSL. Line oriented:
//
//   # comment
//   motion "<name>"
//   segment "<label>"
//   move <axis> <target> <seconds>
//   wait <seconds>
//
// Durations carry at most three decimals and are held as whole milliseconds,
// so serialize/parse round-trips exactly.

namespace alterforge {

inline constexpr int kMaxStepDurationMs = 60'000;
inline constexpr int kMaxScriptDurationMs = 300'000;
inline constexpr std::size_t kMaxLabelLength = 120;

// Fields are plain ints so that hand-built ASTs can be out of range; the
// parser never produces such values and `validate` reports them.
struct Move {
  int axis = 1;
  int target = 0;
  int duration_ms = 0;
  friend bool operator==(const Move&, const Move&) = default;
};

struct Wait {
  int duration_ms = 0;
  friend bool operator==(const Wait&, const Wait&) = default;
};

struct SegmentStart {
  std::string label;
  friend bool operator==(const SegmentStart&, const SegmentStart&) = default;
};

using Step = std::variant<Move, Wait, SegmentStart>;

struct MotionScript {
  std::string name;
  std::vector<Step> steps;
  friend bool operator==(const MotionScript&, const MotionScript&) = default;
};

enum class ParseErrorKind { syntax, unknown_axis, value_range, duration_range, empty_script };

std::string_view to_string(ParseErrorKind kind) noexcept;

struct ParseError {
  int line = 1;    // 1-based
  int column = 1;  // 1-based, byte offset within the line
  ParseErrorKind kind = ParseErrorKind::syntax;
  std::string message;

  std::string describe() const;
  friend bool operator==(const ParseError&, const ParseError&) = default;
};

using ParseResult = Result<MotionScript, ParseError>;

// Never throws and never executes anything. Reports the first error.
ParseResult parse(std::string_view source, BodyTable table = default_table());

// Canonical text: header, one statement per line, durations with three decimals.
std::string serialize(const MotionScript& script);

std::string format_duration(int duration_ms);

enum class IssueKind {
  empty_script,
  unknown_axis,
  value_range,
  duration_range,
  label_range,
  total_duration,
  batch_conflict,
  no_matching_steps,
};

enum class Severity { error, warning };

std::string_view to_string(IssueKind kind) noexcept;
std::string_view to_string(Severity severity) noexcept;

struct ValidationIssue {
  std::optional<std::size_t> step_index;
  IssueKind kind;
  Severity severity;
  std::string message;
};

std::vector<ValidationIssue> validate(const MotionScript& script, BodyTable table = default_table());

bool has_errors(const std::vector<ValidationIssue>& issues) noexcept;

// Execution plan. Consecutive moves with equal duration (no wait or segment
// between them) start together and form one batch; a wait is its own batch;
// segment markers occupy no time.
struct Batch {
  enum class Kind { moves, wait };
  Kind kind;
  std::size_t first_step;  // index into script.steps
  std::size_t end_step;    // one past the last step
  int start_ms;
  int duration_ms;
};

std::vector<Batch> plan_batches(const MotionScript& script);

int total_duration_ms(const MotionScript& script);

struct SegmentMark {
  std::size_t step_index;
  int start_ms;
  std::string label;
};

std::vector<SegmentMark> segment_marks(const MotionScript& script);

struct DirectEdit {
  int axis = 1;
  int target = 0;
  std::optional<std::string> segment;  // nullopt = every segment
};

struct EditResult {
  MotionScript script;
  std::size_t changed_steps = 0;
  std::vector<ValidationIssue> issues;  // no_matching_steps warning when nothing changed
};

// Retargets every move on `edit.axis` (within the named segment, if any).
// Throws unknown_axis, value_range or unknown_segment.
EditResult apply_direct_edit(const MotionScript& script, const DirectEdit& edit,
                             BodyTable table = default_table());

// Structured AST export used by the memory store and the service.
nlohmann::json script_to_json(const MotionScript& script);
MotionScript script_from_json(const nlohmann::json& doc);

}  // namespace alterforge
