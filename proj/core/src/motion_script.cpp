#include "alterforge/motion_script.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "text_util.hpp"

namespace alterforge {

std::string_view to_string(ParseErrorKind kind) noexcept {
  switch (kind) {
    case ParseErrorKind::syntax: return "syntax";
    case ParseErrorKind::unknown_axis: return "unknown_axis";
    case ParseErrorKind::value_range: return "value_range";
    case ParseErrorKind::duration_range: return "duration_range";
    case ParseErrorKind::empty_script: return "empty_script";
  }
  return "syntax";
}

std::string_view to_string(IssueKind kind) noexcept {
  switch (kind) {
    case IssueKind::empty_script: return "empty_script";
    case IssueKind::unknown_axis: return "unknown_axis";
    case IssueKind::value_range: return "value_range";
    case IssueKind::duration_range: return "duration_range";
    case IssueKind::label_range: return "label_range";
    case IssueKind::total_duration: return "total_duration";
    case IssueKind::batch_conflict: return "batch_conflict";
    case IssueKind::no_matching_steps: return "no_matching_steps";
  }
  return "empty_script";
}

std::string_view to_string(Severity severity) noexcept {
  return severity == Severity::error ? "error" : "warning";
}

std::string ParseError::describe() const {
  return "line " + std::to_string(line) + ", column " + std::to_string(column) + " (" +
         std::string(to_string(kind)) + "): " + message;
}

namespace {

struct Token {
  std::string_view text;
  int column;  // 1-based
  bool quoted = false;
  std::string value;  // unescaped content for quoted tokens
};

class LineParser {
 public:
  LineParser(std::string_view line, int line_no, BodyTable table)
      : line_(line), line_no_(line_no), table_(table) {}

  // Returns nullopt for blank/comment lines.
  std::optional<ParseError> tokenize(std::vector<Token>& out) {
    std::size_t i = 0;
    while (i < line_.size()) {
      const char c = line_[i];
      if (c == ' ' || c == '\t') {
        ++i;
        continue;
      }
      if (c == '#') break;
      const int column = static_cast<int>(i) + 1;
      if (c == '"') {
        Token tok{{}, column, true, {}};
        std::size_t j = i + 1;
        bool closed = false;
        while (j < line_.size()) {
          const char d = line_[j];
          if (d == '\\') {
            if (j + 1 >= line_.size()) break;
            const char e = line_[j + 1];
            if (e != '"' && e != '\\') {
              return error(static_cast<int>(j) + 1, ParseErrorKind::syntax,
                           "unsupported escape sequence");
            }
            tok.value.push_back(e);
            j += 2;
            continue;
          }
          if (d == '"') {
            closed = true;
            break;
          }
          if (static_cast<unsigned char>(d) < 0x20 || d == 0x7F) {
            return error(static_cast<int>(j) + 1, ParseErrorKind::syntax,
                         "control character inside string");
          }
          tok.value.push_back(d);
          ++j;
        }
        if (!closed) return error(column, ParseErrorKind::syntax, "unterminated string");
        if (!detail::valid_utf8(tok.value)) {
          return error(column, ParseErrorKind::syntax, "string is not valid UTF-8");
        }
        tok.text = line_.substr(i, j + 1 - i);
        out.push_back(std::move(tok));
        i = j + 1;
        if (i < line_.size() && line_[i] != ' ' && line_[i] != '\t' && line_[i] != '#') {
          return error(static_cast<int>(i) + 1, ParseErrorKind::syntax,
                       "expected whitespace after string");
        }
        continue;
      }
      std::size_t j = i;
      while (j < line_.size() && line_[j] != ' ' && line_[j] != '\t' && line_[j] != '#') ++j;
      out.push_back(Token{line_.substr(i, j - i), column, false, {}});
      i = j;
    }
    return std::nullopt;
  }

  std::optional<ParseError> error(int column, ParseErrorKind kind, std::string message) const {
    return ParseError{line_no_, column, kind, std::move(message)};
  }

  // Signed decimal integer; bare digits with optional leading '-'.
  std::optional<ParseError> integer(const Token& tok, std::string_view what, int& out) const {
    const auto text = tok.text;
    if (tok.quoted || text.empty()) {
      return error(tok.column, ParseErrorKind::syntax, "expected integer " + std::string(what));
    }
    std::size_t start = text[0] == '-' ? 1 : 0;
    if (start == text.size()) {
      return error(tok.column, ParseErrorKind::syntax, "expected integer " + std::string(what));
    }
    for (std::size_t k = start; k < text.size(); ++k) {
      if (text[k] < '0' || text[k] > '9') {
        return error(tok.column, ParseErrorKind::syntax,
                     "expected integer " + std::string(what) + ", got '" + printable(text) + "'");
      }
    }
    // Clamp absurd digit strings; anything this large is out of range anyway.
    long long value = 0;
    for (std::size_t k = start; k < text.size(); ++k) {
      value = value * 10 + (text[k] - '0');
      if (value > 1'000'000'000LL) {
        value = 1'000'000'000LL;
        break;
      }
    }
    out = static_cast<int>(start ? -value : value);
    return std::nullopt;
  }

  // Decimal seconds with at most three fractional digits -> milliseconds.
  std::optional<ParseError> seconds(const Token& tok, int& out_ms) const {
    const auto text = tok.text;
    auto bad = [&] {
      return error(tok.column, ParseErrorKind::syntax,
                   "expected duration in seconds (up to 3 decimals), got '" + printable(text) + "'");
    };
    if (tok.quoted || text.empty()) return bad();
    bool negative = false;
    std::size_t k = 0;
    if (text[0] == '-') {
      negative = true;
      k = 1;
    }
    long long whole = 0;
    std::size_t digits = 0;
    for (; k < text.size() && text[k] >= '0' && text[k] <= '9'; ++k, ++digits) {
      whole = std::min<long long>(whole * 10 + (text[k] - '0'), 1'000'000'000LL);
    }
    if (digits == 0) return bad();
    long long frac = 0;
    if (k < text.size()) {
      if (text[k] != '.') return bad();
      ++k;
      std::size_t frac_digits = 0;
      for (; k < text.size() && text[k] >= '0' && text[k] <= '9'; ++k, ++frac_digits) {
        if (frac_digits >= 3) return bad();
        frac = frac * 10 + (text[k] - '0');
      }
      if (frac_digits == 0 || k != text.size()) return bad();
      for (std::size_t pad = frac_digits; pad < 3; ++pad) frac *= 10;
    }
    long long ms = std::min<long long>(whole * 1000 + frac, 1'000'000'000LL);
    if (negative) ms = -ms;
    if (ms <= 0 || ms > kMaxStepDurationMs) {
      return error(tok.column, ParseErrorKind::duration_range,
                   "duration must be > 0 and <= 60 seconds");
    }
    out_ms = static_cast<int>(ms);
    return std::nullopt;
  }

  static std::string printable(std::string_view text) {
    std::string out;
    for (unsigned char c : text.substr(0, 40)) {
      if (c >= 0x20 && c < 0x7F) {
        out.push_back(static_cast<char>(c));
      } else {
        static constexpr char hex[] = "0123456789abcdef";
        out += "\\x";
        out.push_back(hex[c >> 4]);
        out.push_back(hex[c & 0xF]);
      }
    }
    return out;
  }

  BodyTable table() const { return table_; }

 private:
  std::string_view line_;
  int line_no_;
  BodyTable table_;
};

std::string quote(std::string_view text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

ParseResult parse(std::string_view source, BodyTable table) {
  MotionScript script;
  bool header_seen = false;
  const auto lines = detail::split_lines(source);
  int line_no = 0;
  for (const auto line : lines) {
    ++line_no;
    LineParser lp(line, line_no, table);
    std::vector<Token> tokens;
    if (auto err = lp.tokenize(tokens)) return *err;
    if (tokens.empty()) continue;

    const Token& head = tokens.front();
    auto expect_args = [&](std::size_t n, std::string_view usage) -> std::optional<ParseError> {
      if (tokens.size() != n + 1) {
        const int column = tokens.size() > n + 1 ? tokens[n + 1].column : head.column;
        return *lp.error(column, ParseErrorKind::syntax, "usage: " + std::string(usage));
      }
      return std::nullopt;
    };

    if (head.quoted) {
      return *lp.error(head.column, ParseErrorKind::syntax, "expected a statement keyword");
    }
    if (head.text == "motion") {
      if (auto err = expect_args(1, "motion \"<name>\"")) return *err;
      if (!tokens[1].quoted) {
        return *lp.error(tokens[1].column, ParseErrorKind::syntax, "motion name must be quoted");
      }
      if (header_seen || !script.steps.empty()) {
        return *lp.error(head.column, ParseErrorKind::syntax,
                        "motion header must appear once, before any step");
      }
      header_seen = true;
      script.name = tokens[1].value;
    } else if (head.text == "segment") {
      if (auto err = expect_args(1, "segment \"<label>\"")) return *err;
      if (!tokens[1].quoted) {
        return *lp.error(tokens[1].column, ParseErrorKind::syntax, "segment label must be quoted");
      }
      const auto length = detail::utf8_length(tokens[1].value);
      if (length == 0 || length > kMaxLabelLength) {
        return *lp.error(tokens[1].column, ParseErrorKind::value_range,
                        "segment label must be 1..120 characters");
      }
      script.steps.emplace_back(SegmentStart{tokens[1].value});
    } else if (head.text == "move") {
      if (auto err = expect_args(3, "move <axis> <target> <seconds>")) return *err;
      Move move;
      if (auto err = lp.integer(tokens[1], "axis", move.axis)) return *err;
      if (!AxisId::valid(move.axis) || find_axis(table, move.axis) == nullptr) {
        return *lp.error(tokens[1].column, ParseErrorKind::unknown_axis,
                        "axis " + std::to_string(move.axis) + " does not exist (valid: 1..43)");
      }
      if (auto err = lp.integer(tokens[2], "target", move.target)) return *err;
      if (move.target < 0 || move.target > 255) {
        return *lp.error(tokens[2].column, ParseErrorKind::value_range,
                        "target " + std::to_string(move.target) + " outside 0..255");
      }
      if (auto err = lp.seconds(tokens[3], move.duration_ms)) return *err;
      script.steps.emplace_back(move);
    } else if (head.text == "wait") {
      if (auto err = expect_args(1, "wait <seconds>")) return *err;
      Wait wait;
      if (auto err = lp.seconds(tokens[1], wait.duration_ms)) return *err;
      script.steps.emplace_back(wait);
    } else {
      return *lp.error(head.column, ParseErrorKind::syntax,
                      "unknown statement '" + LineParser::printable(head.text) + "'");
    }
  }
  if (script.steps.empty()) {
    return ParseError{std::max(1, line_no), 1, ParseErrorKind::empty_script,
                      "script contains no steps"};
  }
  if (total_duration_ms(script) > kMaxScriptDurationMs) {
    return ParseError{std::max(1, line_no), 1, ParseErrorKind::duration_range,
                      "total duration exceeds 300 seconds"};
  }
  return script;
}

std::string format_duration(int duration_ms) {
  const bool negative = duration_ms < 0;
  const long long abs_ms = negative ? -static_cast<long long>(duration_ms) : duration_ms;
  char frac[4];
  std::snprintf(frac, sizeof frac, "%03lld", abs_ms % 1000);
  return (negative ? "-" : "") + std::to_string(abs_ms / 1000) + "." + frac;
}

std::string serialize(const MotionScript& script) {
  std::ostringstream out;
  out << "motion " << quote(script.name) << '\n';
  for (const auto& step : script.steps) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Move>) {
            out << "move " << s.axis << ' ' << s.target << ' ' << format_duration(s.duration_ms) << '\n';
          } else if constexpr (std::is_same_v<T, Wait>) {
            out << "wait " << format_duration(s.duration_ms) << '\n';
          } else {
            out << "segment " << quote(s.label) << '\n';
          }
        },
        step);
  }
  return out.str();
}

std::vector<Batch> plan_batches(const MotionScript& script) {
  std::vector<Batch> batches;
  int clock = 0;
  const auto& steps = script.steps;
  std::size_t i = 0;
  while (i < steps.size()) {
    if (const auto* move = std::get_if<Move>(&steps[i])) {
      std::size_t j = i + 1;
      while (j < steps.size()) {
        const auto* next = std::get_if<Move>(&steps[j]);
        if (!next || next->duration_ms != move->duration_ms) break;
        ++j;
      }
      batches.push_back(Batch{Batch::Kind::moves, i, j, clock, move->duration_ms});
      clock += std::max(0, move->duration_ms);
      i = j;
    } else if (const auto* wait = std::get_if<Wait>(&steps[i])) {
      batches.push_back(Batch{Batch::Kind::wait, i, i + 1, clock, wait->duration_ms});
      clock += std::max(0, wait->duration_ms);
      ++i;
    } else {
      ++i;
    }
  }
  return batches;
}

int total_duration_ms(const MotionScript& script) {
  long long total = 0;
  for (const auto& batch : plan_batches(script)) total += std::max(0, batch.duration_ms);
  return static_cast<int>(std::min<long long>(total, std::numeric_limits<int>::max()));
}

std::vector<SegmentMark> segment_marks(const MotionScript& script) {
  std::vector<SegmentMark> marks;
  const auto batches = plan_batches(script);
  std::size_t b = 0;
  int clock = 0;
  for (std::size_t i = 0; i < script.steps.size(); ++i) {
    while (b < batches.size() && batches[b].end_step <= i) {
      clock = batches[b].start_ms + std::max(0, batches[b].duration_ms);
      ++b;
    }
    if (const auto* seg = std::get_if<SegmentStart>(&script.steps[i])) {
      marks.push_back(SegmentMark{i, clock, seg->label});
    }
  }
  return marks;
}

std::vector<ValidationIssue> validate(const MotionScript& script, BodyTable table) {
  std::vector<ValidationIssue> issues;
  auto add = [&](std::optional<std::size_t> index, IssueKind kind, Severity severity, std::string msg) {
    issues.push_back(ValidationIssue{index, kind, severity, std::move(msg)});
  };
  if (script.steps.empty()) {
    add(std::nullopt, IssueKind::empty_script, Severity::error, "script has no steps");
    return issues;
  }
  auto check_duration = [&](std::size_t index, int ms) {
    if (ms <= 0 || ms > kMaxStepDurationMs) {
      add(index, IssueKind::duration_range, Severity::error,
          "duration " + format_duration(ms) + " s outside (0, 60]");
    }
  };
  for (std::size_t i = 0; i < script.steps.size(); ++i) {
    const auto& step = script.steps[i];
    if (const auto* move = std::get_if<Move>(&step)) {
      if (!AxisId::valid(move->axis) || find_axis(table, move->axis) == nullptr) {
        add(i, IssueKind::unknown_axis, Severity::error,
            "axis " + std::to_string(move->axis) + " is not in the body table");
      }
      if (move->target < 0 || move->target > 255) {
        add(i, IssueKind::value_range, Severity::error,
            "target " + std::to_string(move->target) + " outside 0..255");
      }
      check_duration(i, move->duration_ms);
    } else if (const auto* wait = std::get_if<Wait>(&step)) {
      check_duration(i, wait->duration_ms);
    } else {
      const auto& label = std::get<SegmentStart>(step).label;
      const auto length = detail::utf8_length(label);
      if (length == 0 || length > kMaxLabelLength || !detail::valid_utf8(label)) {
        add(i, IssueKind::label_range, Severity::error, "segment label must be 1..120 characters");
      }
    }
  }
  const long long total = [&] {
    long long sum = 0;
    for (const auto& batch : plan_batches(script)) sum += std::max(0, batch.duration_ms);
    return sum;
  }();
  if (total > kMaxScriptDurationMs) {
    add(std::nullopt, IssueKind::total_duration, Severity::error,
        "total duration " + format_duration(static_cast<int>(std::min<long long>(total, 2'000'000'000))) +
            " s exceeds 300 s");
  }
  for (const auto& batch : plan_batches(script)) {
    if (batch.kind != Batch::Kind::moves) continue;
    std::set<int> seen;
    for (std::size_t i = batch.first_step; i < batch.end_step; ++i) {
      const int axis = std::get<Move>(script.steps[i]).axis;
      if (!seen.insert(axis).second) {
        add(i, IssueKind::batch_conflict, Severity::warning,
            "axis " + std::to_string(axis) + " moved twice in one batch; the last move wins");
      }
    }
  }
  return issues;
}

bool has_errors(const std::vector<ValidationIssue>& issues) noexcept {
  return std::any_of(issues.begin(), issues.end(),
                     [](const ValidationIssue& issue) { return issue.severity == Severity::error; });
}

EditResult apply_direct_edit(const MotionScript& script, const DirectEdit& edit, BodyTable table) {
  if (!AxisId::valid(edit.axis) || find_axis(table, edit.axis) == nullptr) {
    throw Error(Errc::unknown_axis, "axis " + std::to_string(edit.axis) + " does not exist");
  }
  if (edit.target < 0 || edit.target > 255) {
    throw Error(Errc::value_range, "target " + std::to_string(edit.target) + " outside 0..255");
  }
  if (edit.segment) {
    const bool exists = std::any_of(script.steps.begin(), script.steps.end(), [&](const Step& step) {
      const auto* seg = std::get_if<SegmentStart>(&step);
      return seg && seg->label == *edit.segment;
    });
    if (!exists) throw Error(Errc::unknown_segment, "no segment labelled '" + *edit.segment + "'");
  }

  EditResult result{script, 0, {}};
  bool in_scope = !edit.segment.has_value();
  for (auto& step : result.script.steps) {
    if (const auto* seg = std::get_if<SegmentStart>(&step)) {
      if (edit.segment) in_scope = seg->label == *edit.segment;
      continue;
    }
    auto* move = std::get_if<Move>(&step);
    if (move && in_scope && move->axis == edit.axis) {
      move->target = edit.target;
      ++result.changed_steps;
    }
  }
  if (result.changed_steps == 0) {
    result.issues.push_back(ValidationIssue{std::nullopt, IssueKind::no_matching_steps, Severity::warning,
                                            "no move on axis " + std::to_string(edit.axis) +
                                                (edit.segment ? " in segment '" + *edit.segment + "'" : "")});
  }
  return result;
}

nlohmann::json script_to_json(const MotionScript& script) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& step : script.steps) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Move>) {
            steps.push_back({{"op", "move"}, {"axis", s.axis}, {"target", s.target}, {"duration_ms", s.duration_ms}});
          } else if constexpr (std::is_same_v<T, Wait>) {
            steps.push_back({{"op", "wait"}, {"duration_ms", s.duration_ms}});
          } else {
            steps.push_back({{"op", "segment"}, {"label", s.label}});
          }
        },
        step);
  }
  return {{"name", script.name}, {"steps", std::move(steps)}};
}

MotionScript script_from_json(const nlohmann::json& doc) {
  try {
    MotionScript script;
    script.name = doc.at("name").get<std::string>();
    for (const auto& s : doc.at("steps")) {
      const auto op = s.at("op").get<std::string>();
      if (op == "move") {
        script.steps.emplace_back(
            Move{s.at("axis").get<int>(), s.at("target").get<int>(), s.at("duration_ms").get<int>()});
      } else if (op == "wait") {
        script.steps.emplace_back(Wait{s.at("duration_ms").get<int>()});
      } else if (op == "segment") {
        script.steps.emplace_back(SegmentStart{s.at("label").get<std::string>()});
      } else {
        throw Error(Errc::malformed, "unknown step op '" + op + "'");
      }
    }
    return script;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, std::string("bad script document: ") + e.what());
  }
}

}  // namespace alterforge
