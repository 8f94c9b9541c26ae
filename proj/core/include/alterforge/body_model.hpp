#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace alterforge {

inline constexpr int kAxisCount = 43;

// 1-based actuator channel. Construction outside 1..43 throws unknown_axis.
class AxisId {
 public:
  explicit AxisId(int id);

  static constexpr bool valid(int id) noexcept { return id >= 1 && id <= kAxisCount; }

  constexpr int value() const noexcept { return id_; }
  constexpr std::size_t index() const noexcept { return static_cast<std::size_t>(id_ - 1); }

  friend constexpr auto operator<=>(AxisId, AxisId) = default;

 private:
  int id_;
};

enum class AxisGroup { face, head, torso, left_arm, right_arm };

std::string_view to_string(AxisGroup group) noexcept;
AxisGroup parse_axis_group(std::string_view text);

struct AxisSpec {
  AxisId id;
  std::string name;
  std::uint8_t neutral;
  std::string low_label;   // meaning of 0
  std::string high_label;  // meaning of 255
  AxisGroup group;

  friend bool operator==(const AxisSpec&, const AxisSpec&) = default;
};

using BodyTable = std::span<const AxisSpec>;

// The full 43-axis table. Axes 1-3 carry the android's published semantics;
// 4-43 are this project's stand-in grouping (face, head, torso, arms).
// Returned by reference to a process-wide immutable instance.
const std::vector<AxisSpec>& default_table();

const AxisSpec* find_axis(BodyTable table, int id) noexcept;

// Instantaneous state: one byte per axis, dense, 0-based storage.
class Pose {
 public:
  Pose() { values_.fill(0); }
  explicit Pose(const std::array<std::uint8_t, kAxisCount>& values) : values_(values) {}

  std::uint8_t operator[](AxisId axis) const noexcept { return values_[axis.index()]; }
  std::uint8_t& operator[](AxisId axis) noexcept { return values_[axis.index()]; }

  // 1-based accessors for callers holding raw ids; throws unknown_axis.
  std::uint8_t at(int axis) const { return values_[AxisId(axis).index()]; }
  void set(int axis, std::uint8_t value) { values_[AxisId(axis).index()] = value; }

  std::span<const std::uint8_t, kAxisCount> values() const noexcept { return values_; }

  friend bool operator==(const Pose&, const Pose&) = default;

 private:
  std::array<std::uint8_t, kAxisCount> values_;
};

Pose neutral_pose(BodyTable table = default_table());

// Tab-separated export, one line per axis:
// `id<TAB>name<TAB>neutral<TAB>low_label<TAB>high_label<TAB>group`.
std::string render_table_tsv(BodyTable table);
std::vector<AxisSpec> parse_table_tsv(std::string_view text);

// One prompt line per axis, e.g.
// `Axis 1: Eyebrows. 255 = angry, 0 = surprised, 64 = neutral.`
std::string render_axis_prompt(BodyTable table);

// Recovers the axis ids mentioned by `render_axis_prompt` output, in order.
std::vector<int> extract_prompt_axis_ids(std::string_view prompt);

}  // namespace alterforge
