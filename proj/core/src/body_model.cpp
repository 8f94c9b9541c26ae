#include "alterforge/body_model.hpp"

#include <charconv>
#include <sstream>

#include "alterforge/error.hpp"
#include "text_util.hpp"

namespace alterforge {

AxisId::AxisId(int id) : id_(id) {
  if (!valid(id)) {
    throw Error(Errc::unknown_axis, "axis " + std::to_string(id) + " is outside 1..43");
  }
}

std::string_view to_string(AxisGroup group) noexcept {
  switch (group) {
    case AxisGroup::face: return "face";
    case AxisGroup::head: return "head";
    case AxisGroup::torso: return "torso";
    case AxisGroup::left_arm: return "left_arm";
    case AxisGroup::right_arm: return "right_arm";
  }
  return "face";
}

AxisGroup parse_axis_group(std::string_view text) {
  if (text == "face") return AxisGroup::face;
  if (text == "head") return AxisGroup::head;
  if (text == "torso") return AxisGroup::torso;
  if (text == "left_arm") return AxisGroup::left_arm;
  if (text == "right_arm") return AxisGroup::right_arm;
  throw Error(Errc::malformed, "unknown axis group '" + std::string(text) + "'");
}

namespace {

struct ArmJoint {
  const char* name;
  const char* low;
  const char* high;
};

// Shared by both arms; the side is prefixed when the table is built.
constexpr ArmJoint kArmJoints[] = {
    {"shoulder shrug", "lowered", "raised"},
    {"shoulder flexion", "arm back", "arm forward and up"},
    {"shoulder abduction", "arm against body", "arm out to the side"},
    {"upper arm rotation", "inward", "outward"},
    {"elbow", "straight", "fully bent"},
    {"forearm rotation", "palm down", "palm up"},
    {"wrist flexion", "bent down", "bent up"},
    {"wrist deviation", "toward thumb", "toward little finger"},
    {"thumb", "open", "closed"},
    {"index finger", "extended", "curled"},
    {"middle finger", "extended", "curled"},
    {"ring and little fingers", "extended", "curled"},
};

std::vector<AxisSpec> build_default_table() {
  std::vector<AxisSpec> table;
  table.reserve(kAxisCount);
  auto add = [&](std::string name, int neutral, std::string low, std::string high, AxisGroup group) {
    const int id = static_cast<int>(table.size()) + 1;
    table.push_back(AxisSpec{AxisId(id), std::move(name), static_cast<std::uint8_t>(neutral),
                             std::move(low), std::move(high), group});
  };

  // Face. Axes 1-3 are the published ones; neutrals for 4-12 are per-axis.
  add("Eyebrows", 64, "surprised", "angry", AxisGroup::face);
  add("Pupils horizontal", 140, "right", "left", AxisGroup::face);
  add("Pupils vertical", 128, "down", "up", AxisGroup::face);
  add("Upper eyelids", 160, "closed", "wide open", AxisGroup::face);
  add("Lower eyelids", 96, "relaxed", "squinting", AxisGroup::face);
  add("Cheeks", 64, "relaxed", "raised", AxisGroup::face);
  add("Mouth corners", 100, "frown", "smile", AxisGroup::face);
  add("Jaw", 0, "closed", "wide open", AxisGroup::face);
  add("Upper lip", 48, "relaxed", "sneer", AxisGroup::face);
  add("Lip pucker", 32, "spread", "puckered", AxisGroup::face);
  add("Nose wrinkle", 0, "smooth", "wrinkled", AxisGroup::face);
  add("Forehead", 64, "smooth", "furrowed", AxisGroup::face);

  add("Head pitch", 128, "down", "up", AxisGroup::head);
  add("Head yaw", 128, "right", "left", AxisGroup::head);
  add("Head roll", 128, "tilt right", "tilt left", AxisGroup::head);

  add("Torso pitch", 128, "lean back", "lean forward", AxisGroup::torso);
  add("Torso yaw", 128, "turn right", "turn left", AxisGroup::torso);
  add("Torso roll", 128, "tilt right", "tilt left", AxisGroup::torso);
  add("Chest", 128, "exhale", "inhale", AxisGroup::torso);

  for (const auto& joint : kArmJoints) {
    add(std::string("Left ") + joint.name, 128, joint.low, joint.high, AxisGroup::left_arm);
  }
  for (const auto& joint : kArmJoints) {
    add(std::string("Right ") + joint.name, 128, joint.low, joint.high, AxisGroup::right_arm);
  }
  return table;
}

int parse_int_field(std::string_view text, std::string_view what) {
  int value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw Error(Errc::malformed, "bad " + std::string(what) + " field '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

const std::vector<AxisSpec>& default_table() {
  static const std::vector<AxisSpec> table = build_default_table();
  return table;
}

const AxisSpec* find_axis(BodyTable table, int id) noexcept {
  for (const auto& spec : table) {
    if (spec.id.value() == id) return &spec;
  }
  return nullptr;
}

Pose neutral_pose(BodyTable table) {
  Pose pose;
  for (const auto& spec : table) pose[spec.id] = spec.neutral;
  return pose;
}

std::string render_table_tsv(BodyTable table) {
  std::ostringstream out;
  for (const auto& spec : table) {
    out << spec.id.value() << '\t' << spec.name << '\t' << static_cast<int>(spec.neutral) << '\t'
        << spec.low_label << '\t' << spec.high_label << '\t' << to_string(spec.group) << '\n';
  }
  return out.str();
}

std::vector<AxisSpec> parse_table_tsv(std::string_view text) {
  std::vector<AxisSpec> table;
  for (const auto& raw : detail::split_lines(text)) {
    const std::string_view line = detail::trim(raw);
    if (line.empty()) continue;
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 6) {
      throw Error(Errc::malformed, "axis table line needs 6 tab-separated fields: " + std::string(line));
    }
    const int neutral = parse_int_field(fields[2], "neutral");
    if (neutral < 0 || neutral > 255) {
      throw Error(Errc::value_range, "neutral " + std::to_string(neutral) + " outside 0..255");
    }
    table.push_back(AxisSpec{AxisId(parse_int_field(fields[0], "id")), std::string(fields[1]),
                             static_cast<std::uint8_t>(neutral), std::string(fields[3]),
                             std::string(fields[4]), parse_axis_group(fields[5])});
  }
  return table;
}

std::string render_axis_prompt(BodyTable table) {
  std::ostringstream out;
  for (const auto& spec : table) {
    out << "Axis " << spec.id.value() << ": " << spec.name << ". 255 = " << spec.high_label
        << ", 0 = " << spec.low_label << ", " << static_cast<int>(spec.neutral) << " = neutral.\n";
  }
  return out.str();
}

std::vector<int> extract_prompt_axis_ids(std::string_view prompt) {
  std::vector<int> ids;
  for (const auto& raw : detail::split_lines(prompt)) {
    std::string_view line = detail::trim(raw);
    constexpr std::string_view prefix = "Axis ";
    if (!line.starts_with(prefix)) continue;
    line.remove_prefix(prefix.size());
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    int id = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + colon, id);
    if (ec == std::errc{} && ptr == line.data() + colon) ids.push_back(id);
  }
  return ids;
}

}  // namespace alterforge
