#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "alterforge/body_model.hpp"
#include "alterforge/completion.hpp"
#include "alterforge/error.hpp"
#include "alterforge/motion_script.hpp"

namespace alterforge {

struct PipelineConfig {
  std::string model = "gpt-4-0314";
  double temp1 = 0.7;  // description stage
  double temp2 = 0.5;  // script stage (and its repairs)
  int max_repair_attempts = 3;  // total script-stage completions allowed
  int max_tokens = 1024;
};

inline constexpr std::size_t kMaxDescriptionLines = 20;

struct MotionDescription {
  std::vector<std::string> lines;

  std::string text() const;  // lines joined with '\n'
  friend bool operator==(const MotionDescription&, const MotionDescription&) = default;
};

// Versioned prompt files with `{{name}}` placeholders.
struct PromptTemplates {
  std::string describe_system;
  std::string describe_user;    // {{instruction}}
  std::string compile_system;
  std::string compile_user;     // {{axis_table}} {{grammar}} {{example}} {{description}}
  std::string revise_user;      // {{axis_table}} {{grammar}} {{label}} {{script}} {{feedback}}
  std::string agent_turn;       // {{name}} {{occupation}} {{traits}} {{turn}} {{memories}} {{context}}
  std::string reflect;          // {{name}} {{occupation}} {{memories}}
  std::string grammar;
  std::string example;

  static const PromptTemplates& builtin();
  // Missing files in `dir` fall back to the built-in text.
  static PromptTemplates load(const std::filesystem::path& dir);
};

// Replaces every `{{key}}`; unknown placeholders are left untouched.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars);

// Splits a completion into description lines. Numbered (`1.`, `2)`) or
// bulleted (`-`, `*`, `•`) items are collected with their markers stripped;
// unmarked lines following an item are folded into it. Text without any list
// structure becomes a single line.
MotionDescription parse_description(std::string_view completion);

// Removes a surrounding ``` fence if the model wrapped its answer in one.
std::string strip_code_fence(std::string_view completion);

// Stage 1. Throws transport, empty_completion, too_many_lines, invalid_argument.
MotionDescription describe_motion(std::string_view instruction, CompletionClient& client,
                                  const PipelineConfig& config = {},
                                  const PromptTemplates& templates = PromptTemplates::builtin());

struct ScriptAttempt {
  std::string completion;
  std::optional<ParseError> parse_error;
  std::vector<ValidationIssue> issues;  // set when the text parsed but did not validate
};

struct CompileOutcome {
  MotionScript script;
  int repair_rounds = 0;
  std::vector<ScriptAttempt> attempts;
};

class CompileFailed : public Error {
 public:
  explicit CompileFailed(std::vector<ScriptAttempt> attempts);
  const std::vector<ScriptAttempt>& attempts() const noexcept { return attempts_; }
  std::vector<ParseError> parse_errors() const;

 private:
  std::vector<ScriptAttempt> attempts_;
};

std::string render_compile_prompt(const MotionDescription& description, BodyTable table,
                                  const PromptTemplates& templates = PromptTemplates::builtin());

// Stage 2 with the parse-repair loop. Each failure is fed back with its
// line/column and the offending line; at most `max_repair_attempts`
// completions are requested. Throws CompileFailed when they are exhausted.
CompileOutcome compile_description(const MotionDescription& description, BodyTable table,
                                   CompletionClient& client, const PipelineConfig& config = {},
                                   const PromptTemplates& templates = PromptTemplates::builtin());

// LLM rewrite of an existing script in response to free-form feedback; same
// repair loop and bounds as compile_description.
CompileOutcome revise_script(const MotionScript& prior, std::string_view label, std::string_view feedback,
                             BodyTable table, CompletionClient& client, const PipelineConfig& config = {},
                             const PromptTemplates& templates = PromptTemplates::builtin());

struct RawCompletion {
  std::string stage;
  int attempt = 0;
  std::string text;
};

struct Provenance {
  std::string model;
  double temperature_describe = 0.7;
  double temperature_compile = 0.5;
  int script_attempts = 0;
  int repair_rounds = 0;
  std::vector<RawCompletion> completions;

  nlohmann::json to_json() const;
  static Provenance from_json(const nlohmann::json& doc);
};

struct Generation {
  MotionDescription description;
  MotionScript script;
  Provenance provenance;
};

// describe_motion followed by compile_description.
Generation generate(std::string_view instruction, CompletionClient& client, const PipelineConfig& config = {},
                    BodyTable table = default_table(),
                    const PromptTemplates& templates = PromptTemplates::builtin());

}  // namespace alterforge
