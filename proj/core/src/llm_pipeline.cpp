#include "alterforge/llm_pipeline.hpp"

#include <fstream>
#include <sstream>

#include "resources.hpp"
#include "text_util.hpp"

namespace alterforge {

std::string MotionDescription::text() const { return detail::join(lines, "\n"); }

// --- templates -------------------------------------------------------------

namespace {

struct TemplateFile {
  const char* file;
  std::string PromptTemplates::*field;
};

constexpr TemplateFile kTemplateFiles[] = {
    {"describe_system.txt", &PromptTemplates::describe_system},
    {"describe_user.txt", &PromptTemplates::describe_user},
    {"compile_system.txt", &PromptTemplates::compile_system},
    {"compile_user.txt", &PromptTemplates::compile_user},
    {"revise_user.txt", &PromptTemplates::revise_user},
    {"agent_turn.txt", &PromptTemplates::agent_turn},
    {"reflect.txt", &PromptTemplates::reflect},
    {"grammar.txt", &PromptTemplates::grammar},
    {"example_tea.motion", &PromptTemplates::example},
};

}  // namespace

const PromptTemplates& PromptTemplates::builtin() {
  static const PromptTemplates templates = [] {
    PromptTemplates t;
    for (const auto& entry : kTemplateFiles) {
      t.*entry.field = std::string(detail::embedded_resource(std::string("prompts/") + entry.file));
    }
    return t;
  }();
  return templates;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  PromptTemplates t = builtin();
  for (const auto& entry : kTemplateFiles) {
    std::ifstream in(dir / entry.file, std::ios::binary);
    if (!in) continue;
    std::ostringstream buffer;
    buffer << in.rdbuf();
    t.*entry.field = buffer.str();
  }
  return t;
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const auto open = tmpl.find("{{", i);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    out.append(tmpl.substr(i, open - i));
    const std::string key(detail::trim(tmpl.substr(open + 2, close - open - 2)));
    const auto it = vars.find(key);
    if (it != vars.end()) {
      out.append(it->second);
    } else {
      out.append(tmpl.substr(open, close + 2 - open));
    }
    i = close + 2;
  }
  return out;
}

// --- stage 1 -----------------------------------------------------------------

namespace {

// Length of a list marker plus following blanks at the start of `line`, or 0.
std::size_t list_marker_length(std::string_view line) {
  std::size_t i = 0;
  if (line.starts_with("\xE2\x80\xA2")) {  // bullet
    i = 3;
  } else if (!line.empty() && (line[0] == '-' || line[0] == '*')) {
    i = 1;
  } else {
    while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
    if (i == 0 || i > 3 || i >= line.size() || (line[i] != '.' && line[i] != ')')) return 0;
    ++i;
  }
  if (i >= line.size() || (line[i] != ' ' && line[i] != '\t')) return 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  return i;
}

}  // namespace

MotionDescription parse_description(std::string_view completion) {
  MotionDescription description;
  bool any_marker = false;
  for (const auto raw : detail::split_lines(completion)) {
    const auto line = detail::trim(raw);
    if (line.empty()) continue;
    if (const auto marker = list_marker_length(line)) {
      any_marker = true;
      description.lines.emplace_back(detail::trim(line.substr(marker)));
    } else if (any_marker) {
      auto& last = description.lines.back();
      if (!last.empty()) last.push_back(' ');
      last.append(line);
    }
  }
  if (!any_marker) {
    std::string whole;
    for (const auto raw : detail::split_lines(completion)) {
      const auto line = detail::trim(raw);
      if (line.empty()) continue;
      if (!whole.empty()) whole.push_back(' ');
      whole.append(line);
    }
    if (!whole.empty()) description.lines.push_back(std::move(whole));
  }
  std::erase_if(description.lines, [](const std::string& line) { return line.empty(); });
  if (description.lines.empty()) throw Error(Errc::empty_completion, "completion contained no description");
  if (description.lines.size() > kMaxDescriptionLines) {
    throw Error(Errc::too_many_lines, "description has " + std::to_string(description.lines.size()) +
                                          " lines; at most 20 are allowed");
  }
  return description;
}

std::string strip_code_fence(std::string_view completion) {
  const auto text = detail::trim(completion);
  if (!text.starts_with("```")) return std::string(completion);
  const auto first_nl = text.find('\n');
  if (first_nl == std::string_view::npos) return std::string(completion);
  auto body = text.substr(first_nl + 1);
  const auto close = body.rfind("```");
  if (close != std::string_view::npos) body = body.substr(0, close);
  return std::string(body);
}

MotionDescription describe_motion(std::string_view instruction, CompletionClient& client,
                                  const PipelineConfig& config, const PromptTemplates& templates) {
  const std::string subject(detail::trim(instruction));
  if (subject.empty()) throw Error(Errc::invalid_argument, "instruction must not be empty");
  ChatRequest request;
  request.model = config.model;
  request.temperature = config.temp1;
  request.system = templates.describe_system;
  request.user = render_template(templates.describe_user, {{"instruction", subject}});
  request.max_tokens = config.max_tokens;
  request.stage = std::string(stage::describe);
  request.subject = subject;
  request.validate();
  return parse_description(client.send(request));
}

// --- stage 2 -----------------------------------------------------------------

CompileFailed::CompileFailed(std::vector<ScriptAttempt> attempts)
    : Error(Errc::compile_failed,
            "no valid script after " + std::to_string(attempts.size()) + " attempt(s)" +
                (attempts.empty() || !attempts.back().parse_error
                     ? std::string()
                     : "; last error: " + attempts.back().parse_error->describe())),
      attempts_(std::move(attempts)) {}

std::vector<ParseError> CompileFailed::parse_errors() const {
  std::vector<ParseError> errors;
  for (const auto& attempt : attempts_) {
    if (attempt.parse_error) errors.push_back(*attempt.parse_error);
  }
  return errors;
}

namespace {

std::string repair_note(const ScriptAttempt& failed) {
  std::ostringstream out;
  out << "\n\nYour previous answer was:\n\n" << failed.completion;
  if (!failed.completion.empty() && failed.completion.back() != '\n') out << '\n';
  if (failed.parse_error) {
    const auto& err = *failed.parse_error;
    const auto lines = detail::split_lines(strip_code_fence(failed.completion));
    out << "\nIt could not be parsed: " << err.describe() << '\n';
    if (err.line >= 1 && static_cast<std::size_t>(err.line) <= lines.size()) {
      out << "Offending line: " << lines[static_cast<std::size_t>(err.line) - 1] << '\n';
    }
  } else {
    out << "\nIt parsed but broke these rules:\n";
    for (const auto& issue : failed.issues) {
      out << "- " << to_string(issue.kind);
      if (issue.step_index) out << " at step " << *issue.step_index + 1;
      out << ": " << issue.message << '\n';
    }
  }
  out << "\nReturn the complete corrected script only.";
  return out.str();
}

CompileOutcome run_script_loop(const ChatRequest& base, BodyTable table, CompletionClient& client,
                               const PipelineConfig& config) {
  base.validate();
  std::vector<ScriptAttempt> attempts;
  const int limit = std::max(1, config.max_repair_attempts);
  for (int attempt = 0; attempt < limit; ++attempt) {
    ChatRequest request = base;
    request.attempt = attempt;
    if (!attempts.empty()) request.user += repair_note(attempts.back());
    ScriptAttempt record;
    record.completion = client.send(request);
    auto parsed = parse(strip_code_fence(record.completion), table);
    if (!parsed) {
      record.parse_error = parsed.error();
      attempts.push_back(std::move(record));
      continue;
    }
    record.issues = validate(parsed.value(), table);
    const bool clean = record.issues.empty();
    attempts.push_back(std::move(record));
    if (clean) return CompileOutcome{std::move(parsed).value(), attempt, std::move(attempts)};
  }
  throw CompileFailed(std::move(attempts));
}

}  // namespace

std::string render_compile_prompt(const MotionDescription& description, BodyTable table,
                                  const PromptTemplates& templates) {
  std::ostringstream numbered;
  for (std::size_t i = 0; i < description.lines.size(); ++i) {
    numbered << i + 1 << ". " << description.lines[i] << '\n';
  }
  return render_template(templates.compile_user, {{"axis_table", render_axis_prompt(table)},
                                                  {"grammar", templates.grammar},
                                                  {"example", templates.example},
                                                  {"description", numbered.str()}});
}

CompileOutcome compile_description(const MotionDescription& description, BodyTable table,
                                   CompletionClient& client, const PipelineConfig& config,
                                   const PromptTemplates& templates) {
  if (description.lines.empty() || description.lines.size() > kMaxDescriptionLines) {
    throw Error(Errc::invalid_argument, "description must have 1..20 lines");
  }
  ChatRequest request;
  request.model = config.model;
  request.temperature = config.temp2;
  request.system = templates.compile_system;
  request.user = render_compile_prompt(description, table, templates);
  request.max_tokens = config.max_tokens;
  request.stage = std::string(stage::compile);
  request.subject = description.text();
  return run_script_loop(request, table, client, config);
}

CompileOutcome revise_script(const MotionScript& prior, std::string_view label, std::string_view feedback,
                             BodyTable table, CompletionClient& client, const PipelineConfig& config,
                             const PromptTemplates& templates) {
  const std::string note(detail::trim(feedback));
  if (note.empty()) throw Error(Errc::invalid_argument, "feedback must not be empty");
  ChatRequest request;
  request.model = config.model;
  request.temperature = config.temp2;
  request.system = templates.compile_system;
  request.user = render_template(templates.revise_user, {{"axis_table", render_axis_prompt(table)},
                                                         {"grammar", templates.grammar},
                                                         {"label", std::string(label)},
                                                         {"script", serialize(prior)},
                                                         {"feedback", note}});
  request.max_tokens = config.max_tokens;
  request.stage = std::string(stage::revise);
  request.subject = std::string(label) + "\n" + note;
  return run_script_loop(request, table, client, config);
}

// --- chain -------------------------------------------------------------------

nlohmann::json Provenance::to_json() const {
  nlohmann::json raw = nlohmann::json::array();
  for (const auto& c : completions) raw.push_back({{"stage", c.stage}, {"attempt", c.attempt}, {"text", c.text}});
  return {{"model", model},
          {"temperatures", {temperature_describe, temperature_compile}},
          {"script_attempts", script_attempts},
          {"repair_rounds", repair_rounds},
          {"completions", std::move(raw)}};
}

Provenance Provenance::from_json(const nlohmann::json& doc) {
  Provenance p;
  p.model = doc.value("model", "");
  if (doc.contains("temperatures") && doc["temperatures"].size() == 2) {
    p.temperature_describe = doc["temperatures"][0].get<double>();
    p.temperature_compile = doc["temperatures"][1].get<double>();
  }
  p.script_attempts = doc.value("script_attempts", 0);
  p.repair_rounds = doc.value("repair_rounds", 0);
  for (const auto& c : doc.value("completions", nlohmann::json::array())) {
    p.completions.push_back(RawCompletion{c.value("stage", ""), c.value("attempt", 0), c.value("text", "")});
  }
  return p;
}

Generation generate(std::string_view instruction, CompletionClient& client, const PipelineConfig& config,
                    BodyTable table, const PromptTemplates& templates) {
  // The description completion is captured by wrapping the client.
  class Recorder final : public CompletionClient {
   public:
    explicit Recorder(CompletionClient& inner) : inner_(inner) {}
    std::string send(const ChatRequest& request) override {
      auto text = inner_.send(request);
      log.push_back(RawCompletion{request.stage, request.attempt, text});
      return text;
    }
    std::vector<RawCompletion> log;

   private:
    CompletionClient& inner_;
  } recorder(client);

  Generation result;
  result.description = describe_motion(instruction, recorder, config, templates);
  auto outcome = compile_description(result.description, table, recorder, config, templates);
  result.script = std::move(outcome.script);
  result.provenance.model = config.model;
  result.provenance.temperature_describe = config.temp1;
  result.provenance.temperature_compile = config.temp2;
  result.provenance.script_attempts = static_cast<int>(outcome.attempts.size());
  result.provenance.repair_rounds = outcome.repair_rounds;
  result.provenance.completions = std::move(recorder.log);
  return result;
}

}  // namespace alterforge
