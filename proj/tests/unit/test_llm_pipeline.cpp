#include <doctest.h>

#include <nlohmann/json.hpp>

#include "alterforge/completion.hpp"
#include "alterforge/error.hpp"
#include "alterforge/llm_pipeline.hpp"
#include "fixtures.hpp"

using namespace alterforge;

namespace {

FixtureClient recorded() {
  return FixtureClient::from_file(testing_support::fixture_dir() / "recorded_completions.json");
}

// Returns scripted answers in order, regardless of the request.
class SequenceClient final : public CompletionClient {
 public:
  explicit SequenceClient(std::vector<std::string> answers) : answers_(std::move(answers)) {}
  std::string send(const ChatRequest& r) override {
    requests.push_back(r);
    const auto i = std::min(requests.size() - 1, answers_.size() - 1);
    return answers_[i];
  }
  std::vector<ChatRequest> requests;

 private:
  std::vector<std::string> answers_;
};

const MotionDescription kTwoLines{{"Raise the right arm", "Smile"}};

}  // namespace

TEST_CASE("description parsing") {
  CHECK(parse_description("1. Raise\n2) Lower\n- Nod\n* Blink\n\xE2\x80\xA2 Wink").lines ==
        std::vector<std::string>{"Raise", "Lower", "Nod", "Blink", "Wink"});
  CHECK(parse_description("Here is the plan:\n1. Raise the arm\n   slowly\n2. Lower it\n").lines ==
        std::vector<std::string>{"Raise the arm slowly", "Lower it"});
  CHECK(parse_description("Just stand still and breathe.").lines ==
        std::vector<std::string>{"Just stand still and breathe."});
  CHECK(parse_description("Stand\nstill").lines.size() == 1);
  CHECK_THROWS_AS(parse_description("   \n "), Error);
  std::string many;
  for (int i = 1; i <= 21; ++i) many += std::to_string(i) + ". step\n";
  try {
    parse_description(many);
    FAIL("expected too_many_lines");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::too_many_lines);
  }
}

TEST_CASE("code fences are stripped") {
  CHECK(strip_code_fence("```\nmove 1 1 1.000\n```") == "move 1 1 1.000\n");
  CHECK(strip_code_fence("```motion\nwait 1.000\n```\n") == "wait 1.000\n");
  CHECK(strip_code_fence("wait 1.000") == "wait 1.000");
}

TEST_CASE("templates render placeholders and keep unknown ones") {
  CHECK(render_template("a {{x}} b {{y}}", {{"x", "1"}}) == "a 1 b {{y}}");
  const auto& t = PromptTemplates::builtin();
  CHECK(t.describe_user.find("{{instruction}}") != std::string::npos);
  CHECK(t.compile_user.find("{{description}}") != std::string::npos);
  CHECK_FALSE(t.grammar.empty());
  CHECK_FALSE(t.example.empty());
  const auto prompt = render_compile_prompt(kTwoLines, default_table());
  CHECK(prompt.find("Eyebrows") != std::string::npos);
  CHECK(prompt.find("1. Raise the right arm") != std::string::npos);
  CHECK(prompt.find("{{") == std::string::npos);
}

TEST_CASE("templates load overrides from a directory") {
  testing_support::TempDir dir("prompts");
  {
    std::ofstream(dir / "describe_user.txt") << "Describe: {{instruction}}";
  }
  const auto t = PromptTemplates::load(dir.path());
  CHECK(t.describe_user == "Describe: {{instruction}}");
  CHECK(t.compile_user == PromptTemplates::builtin().compile_user);
}

TEST_CASE("recorded descriptions replay through the describe stage") {
  auto client = recorded();
  const auto selfie = describe_motion("Take a selfie", client);
  REQUIRE(selfie.lines.size() == 10);
  CHECK(selfie.lines[0] == "Create a big, joyful smile and widen eyes to show excitement");
  const auto ghost = describe_motion("Pretend a ghost", client);
  REQUIRE(ghost.lines.size() == 9);
  const auto& last = ghost.lines.back();
  CHECK(last.substr(last.size() - std::string("maintaining a terrified expression").size()) ==
        "maintaining a terrified expression");
  CHECK_THROWS_AS(describe_motion("  ", client), Error);
}

TEST_CASE("the selfie fixture compiles without repairs") {
  auto client = recorded();
  const auto description = describe_motion("take a selfie", client);
  const auto outcome = compile_description(description, default_table(), client);
  CHECK(outcome.repair_rounds == 0);
  CHECK(outcome.attempts.size() == 1);
  CHECK(validate(outcome.script).empty());
}

TEST_CASE("repair loop feeds the parse error back") {
  SequenceClient client({"move 99 1 1.0", "motion \"x\"\nsegment \"Raise the right arm\"\nmove 33 200 1.0"});
  const auto outcome = compile_description(kTwoLines, default_table(), client);
  CHECK(outcome.repair_rounds == 1);
  REQUIRE(client.requests.size() == 2);
  CHECK(client.requests[1].attempt == 1);
  CHECK(client.requests[1].user.find("move 99 1 1.0") != std::string::npos);
  CHECK(client.requests[1].user.find("line 1, column") != std::string::npos);
  CHECK(client.requests[0].temperature == doctest::Approx(0.5));
}

TEST_CASE("repair loop gives up after the configured attempts") {
  SequenceClient client({"this is not a script"});
  try {
    compile_description(kTwoLines, default_table(), client);
    FAIL("expected compile_failed");
  } catch (const CompileFailed& e) {
    CHECK(e.code() == Errc::compile_failed);
    CHECK(e.attempts().size() == 3);
    CHECK(e.parse_errors().size() == 3);
  }
  CHECK(client.requests.size() == 3);
}

TEST_CASE("warnings count as unclean and trigger a repair") {
  SequenceClient client({"move 1 1 1.0\nmove 1 2 1.0", "move 1 1 1.0\nmove 2 2 1.0"});
  const auto outcome = compile_description(kTwoLines, default_table(), client);
  CHECK(outcome.repair_rounds == 1);
  REQUIRE(outcome.attempts.size() == 2);
  CHECK_FALSE(outcome.attempts[0].issues.empty());
}

TEST_CASE("generate chains both stages and records provenance") {
  auto client = recorded();
  const auto g = generate("take a selfie", client);
  CHECK(g.description.lines.size() == 10);
  CHECK(segment_marks(g.script).size() >= 8);
  CHECK(g.provenance.temperature_describe == doctest::Approx(0.7));
  CHECK(g.provenance.temperature_compile == doctest::Approx(0.5));
  CHECK(g.provenance.script_attempts == 1);
  CHECK(g.provenance.completions.size() == 2);
  const auto j = g.provenance.to_json();
  CHECK(j["temperatures"][0] == 0.7);
  CHECK(j["temperatures"][1] == 0.5);
  const auto back = Provenance::from_json(j);
  CHECK(back.completions.size() == 2);
  CHECK(back.model == g.provenance.model);

  // The smile segment lifts the eyebrows and mouth corners off neutral.
  const auto first_move = std::get<Move>(g.script.steps[1]);
  CHECK(first_move.axis == 1);
  CHECK(first_move.target != 64);
}

TEST_CASE("revision goes through the revise stage") {
  auto client = recorded();
  const auto g = generate("take a selfie", client);
  const auto outcome =
      revise_script(g.script, "take a selfie", "Move your arm more energetically.", default_table(), client);
  CHECK(outcome.repair_rounds == 0);
  CHECK(outcome.script != g.script);
}
