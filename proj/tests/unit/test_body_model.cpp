#include <doctest.h>

#include "alterforge/body_model.hpp"
#include "alterforge/error.hpp"

using namespace alterforge;

TEST_CASE("axis table carries the published semantics of axes 1-3") {
  const auto& t = default_table();
  REQUIRE(t.size() == 43);
  CHECK(t[0].name == "Eyebrows");
  CHECK(t[0].neutral == 64);
  CHECK(t[0].low_label == "surprised");
  CHECK(t[0].high_label == "angry");
  CHECK(t[1].name == "Pupils horizontal");
  CHECK(t[1].neutral == 140);
  CHECK(t[2].name == "Pupils vertical");
  CHECK(t[2].neutral == 128);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i].id.value() == static_cast<int>(i) + 1);
}

TEST_CASE("neutral pose equals the table neutrals") {
  const auto pose = neutral_pose();
  CHECK(pose.at(1) == 64);
  CHECK(pose.at(2) == 140);
  for (const auto& axis : default_table()) CHECK(pose[axis.id] == axis.neutral);
}

TEST_CASE("axis ids outside 1..43 are rejected") {
  CHECK(AxisId::valid(1));
  CHECK(AxisId::valid(43));
  CHECK_FALSE(AxisId::valid(0));
  CHECK_FALSE(AxisId::valid(44));
  try {
    AxisId bad(44);
    FAIL("expected unknown_axis");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_axis);
  }
  Pose p;
  CHECK_THROWS_AS(p.set(0, 1), Error);
}

TEST_CASE("table TSV round-trips") {
  const auto text = render_table_tsv(default_table());
  const auto parsed = parse_table_tsv(text);
  REQUIRE(parsed.size() == default_table().size());
  for (std::size_t i = 0; i < parsed.size(); ++i) CHECK(parsed[i] == default_table()[i]);
}

TEST_CASE("axis prompt mentions every axis once, in order") {
  const auto prompt = render_axis_prompt(default_table());
  CHECK(prompt.find("Eyebrows") != std::string::npos);
  const auto ids = extract_prompt_axis_ids(prompt);
  REQUIRE(ids.size() == 43);
  for (int i = 0; i < 43; ++i) CHECK(ids[static_cast<std::size_t>(i)] == i + 1);
}

TEST_CASE("axis groups parse from their names") {
  for (auto g : {AxisGroup::face, AxisGroup::head, AxisGroup::torso, AxisGroup::left_arm, AxisGroup::right_arm}) {
    CHECK(parse_axis_group(to_string(g)) == g);
  }
  CHECK_THROWS_AS(parse_axis_group("tail"), Error);
}
