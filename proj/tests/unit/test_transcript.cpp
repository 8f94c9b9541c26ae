#include <doctest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "alterforge/error.hpp"
#include "alterforge/transcript.hpp"

using namespace alterforge;

TEST_CASE("turns serialise one object per line") {
  Transcript t{{0, "Xiao", "Hello there", std::nullopt, std::nullopt, std::nullopt},
               {1, "human", "Hi", std::string("wave"), std::string("m-000001"), std::vector<double>{1.0}}};
  const auto text = transcript_to_jsonl(t);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  const auto first = nlohmann::json::parse(text.substr(0, text.find('\n')));
  CHECK(first["motion_label"].is_null());
  CHECK_FALSE(first.contains("motion_id"));
  CHECK_FALSE(first.contains("embedding"));

  const auto back = read_transcript(text);
  REQUIRE(back.size() == 2);
  CHECK(back[1].speaker == "human");
  CHECK(back[1].motion_label == std::optional<std::string>("wave"));
  CHECK(back[1].motion_id == std::optional<std::string>("m-000001"));
  CHECK_FALSE(back[1].embedding.has_value());
  CHECK(transcript_to_jsonl(back) == text);

  std::ostringstream out;
  write_transcript_jsonl(out, t);
  CHECK(out.str() == text);
}

TEST_CASE("plain text transcripts") {
  const auto t = read_transcript("Xiao: The sky is blue\n\njust words\nRilke:  Leaves fall\n");
  REQUIRE(t.size() == 3);
  CHECK(t[0].speaker == "Xiao");
  CHECK(t[0].text == "The sky is blue");
  CHECK(t[1].text == "just words");
  CHECK(t[2].index == 2);
  CHECK(t[2].text == "Leaves fall");
}

TEST_CASE("missing files are reported") {
  CHECK_THROWS_AS(load_transcript("/nonexistent/transcript.jsonl"), Error);
}
