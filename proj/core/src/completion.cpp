#include "alterforge/completion.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "alterforge/body_model.hpp"
#include "alterforge/error.hpp"
#include "alterforge/motion_script.hpp"
#include "text_util.hpp"

namespace alterforge {

void ChatRequest::validate() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw Error(Errc::invalid_argument, "temperature must be within [0, 2]");
  }
  if (system.empty() || user.empty()) {
    throw Error(Errc::invalid_argument, "chat request needs non-empty system and user prompts");
  }
  if (max_tokens < 1) throw Error(Errc::invalid_argument, "max_tokens must be positive");
}

std::string fixture_key(std::string_view stage, std::string_view subject, int attempt) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(detail::fnv1a64(subject)));
  std::string key(stage);
  if (attempt > 0) key += "#" + std::to_string(attempt);
  key += ":";
  key += hash;
  return key;
}

std::string fixture_key(const ChatRequest& request) {
  return fixture_key(request.stage, request.subject, request.attempt);
}

// --- FixtureClient ---------------------------------------------------------

FixtureClient::FixtureClient(std::map<std::string, std::string> fixtures) : fixtures_(std::move(fixtures)) {}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::storage_io, "cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string joined_lines(const nlohmann::json& lines) {
  std::vector<std::string> parts;
  for (const auto& line : lines) parts.push_back(line.get<std::string>());
  return detail::join(parts, "\n");
}

}  // namespace

FixtureClient FixtureClient::from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  std::map<std::string, std::string> fixtures;
  try {
    if (doc.value("version", 1) != 1) {
      throw Error(Errc::schema_version_mismatch, "unsupported fixture file version");
    }
    for (const auto& entry : doc.at("fixtures")) {
      const auto stage = entry.at("stage").get<std::string>();
      const std::string subject = entry.contains("subject_lines") ? joined_lines(entry.at("subject_lines"))
                                                                  : entry.at("subject").get<std::string>();
      std::string completion;
      if (entry.contains("completion_file")) {
        completion = read_file(base_dir / entry.at("completion_file").get<std::string>());
      } else if (entry.contains("completion_lines")) {
        completion = joined_lines(entry.at("completion_lines"));
      } else {
        completion = entry.at("completion").get<std::string>();
      }
      fixtures[fixture_key(stage, subject, entry.value("attempt", 0))] = std::move(completion);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, std::string("bad fixture document: ") + e.what());
  }
  return FixtureClient(std::move(fixtures));
}

FixtureClient FixtureClient::from_file(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, "bad fixture file " + path.string() + ": " + e.what());
  }
  return from_json(doc, path.parent_path());
}

std::string FixtureClient::send(const ChatRequest& request) {
  const auto key = fixture_key(request);
  const auto it = fixtures_.find(key);
  if (it == fixtures_.end()) {
    throw Error(Errc::missing_fixture, "no recorded completion for " + key);
  }
  return it->second;
}

bool FixtureClient::contains(const ChatRequest& request) const {
  return fixtures_.count(fixture_key(request)) != 0;
}

std::unique_ptr<CompletionClient> mock_client(std::map<std::string, std::string> fixtures) {
  return std::make_unique<FixtureClient>(std::move(fixtures));
}

std::string CountingClient::send(const ChatRequest& request) {
  ++calls_;
  return inner_.send(request);
}

std::string FallbackClient::send(const ChatRequest& request) {
  try {
    return primary_->send(request);
  } catch (const Error& e) {
    if (e.code() != Errc::missing_fixture) throw;
  }
  return fallback_->send(request);
}

// --- SyntheticClient -------------------------------------------------------

namespace {

class Dice {
 public:
  explicit Dice(std::string_view seed_text) : state_(detail::fnv1a64(seed_text)) {}
  std::uint64_t next() { return detail::splitmix64(state_); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

constexpr std::array<const char*, 6> kExpressionLines = {
    "Open the eyes wide and raise the eyebrows in delight",
    "Pull the mouth corners into a broad grin",
    "Furrow the brow and narrow the eyes in concentration",
    "Drop the jaw slightly in astonishment",
    "Soften the face into a calm, gentle smile",
    "Wrinkle the nose and squint playfully",
};

constexpr std::array<const char*, 12> kGestureLines = {
    "Lift the right arm forward and open the palm upward",
    "Sweep the left arm outward in a wide arc",
    "Tilt the head to the left and hold it there",
    "Lean the torso forward with curiosity",
    "Turn the torso to the right as if addressing someone",
    "Bend both elbows and bring the hands toward the chest",
    "Raise both shoulders in an exaggerated shrug",
    "Nod the head slowly up and down",
    "Point with the right index finger toward the distance",
    "Inhale deeply, expanding the chest",
    "Wave the left hand beside the face",
    "Lean back and let the arms drift down to rest",
};

struct KeywordAxis {
  const char* keyword;
  int axis;
  int target;
};

// Words in a description line that imply a particular axis and direction.
constexpr KeywordAxis kKeywordAxes[] = {
    {"smile", 7, 230},     {"grin", 7, 240},       {"eyebrow", 1, 20},   {"brow", 12, 200},
    {"eyes wide", 4, 250}, {"squint", 5, 220},     {"jaw", 8, 140},      {"mouth", 8, 110},
    {"nose", 11, 180},     {"nod", 13, 80},        {"tilt", 15, 180},    {"head", 14, 170},
    {"lean forward", 16, 210}, {"lean back", 16, 50}, {"lean", 16, 190}, {"torso", 17, 80},
    {"turn", 17, 190},     {"chest", 19, 210},     {"inhale", 19, 230},  {"shoulder", 20, 200},
    {"shrug", 32, 200},    {"left arm", 21, 200},  {"left hand", 22, 190}, {"wave", 27, 60},
    {"right arm", 33, 210}, {"right hand", 34, 200}, {"elbow", 36, 200}, {"point", 42, 30},
    {"palm", 37, 220},     {"finger", 41, 40},
};

std::string clip_label(std::string_view text) {
  std::string label(detail::trim(text));
  // Cut at a code-point boundary.
  std::size_t count = 0;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if ((static_cast<unsigned char>(label[i]) & 0xC0) != 0x80) {
      if (count == kMaxLabelLength) {
        label.resize(i);
        break;
      }
      ++count;
    }
  }
  std::string clean;
  for (char c : label) clean.push_back(static_cast<unsigned char>(c) < 0x20 ? ' ' : c);
  if (!detail::valid_utf8(clean) || clean.empty()) clean = "Gesture";
  return clean;
}

std::string synthetic_description(std::string_view instruction) {
  Dice dice(std::string("describe|") + std::string(instruction));
  const std::size_t count = 8 + dice.below(3);
  std::vector<std::string> lines;
  lines.emplace_back(kExpressionLines[dice.below(kExpressionLines.size())]);
  std::vector<std::size_t> order(kGestureLines.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[dice.below(i + 1)]);
  for (std::size_t i = 0; lines.size() < count - 1; ++i) lines.emplace_back(kGestureLines[order[i]]);
  lines.emplace_back("Return slowly to the rest position");
  std::ostringstream out;
  for (std::size_t i = 0; i < lines.size(); ++i) out << i + 1 << ". " << lines[i] << '\n';
  return out.str();
}

std::string synthetic_script(std::string_view description_text, std::string_view name) {
  const Pose neutral = neutral_pose();
  MotionScript script;
  script.name = clip_label(name.empty() ? "motion" : name);
  std::vector<int> touched;
  for (const auto raw : detail::split_lines(description_text)) {
    if (detail::trim(raw).empty()) continue;
    const std::string line = detail::to_lower(raw);
    Dice dice(std::string("compile|") + line);
    script.steps.emplace_back(SegmentStart{clip_label(raw)});
    const int duration = 400 + 100 * static_cast<int>(dice.below(9));
    std::vector<int> axes;
    for (const auto& ka : kKeywordAxes) {
      if (line.find(ka.keyword) == std::string::npos) continue;
      if (std::find(axes.begin(), axes.end(), ka.axis) != axes.end()) continue;
      axes.push_back(ka.axis);
      script.steps.emplace_back(Move{ka.axis, ka.target, duration});
      if (axes.size() == 3) break;
    }
    while (axes.size() < 2) {
      const int axis = 1 + static_cast<int>(dice.below(kAxisCount));
      if (std::find(axes.begin(), axes.end(), axis) != axes.end()) continue;
      axes.push_back(axis);
      const int base = neutral.at(axis);
      const int swing = 60 + static_cast<int>(dice.below(80));
      const int target = std::clamp(dice.below(2) ? base + swing : base - swing, 0, 255);
      script.steps.emplace_back(Move{axis, target, duration});
    }
    for (int axis : axes) {
      if (std::find(touched.begin(), touched.end(), axis) == touched.end()) touched.push_back(axis);
    }
  }
  if (script.steps.empty()) script.steps.emplace_back(SegmentStart{"Gesture"});
  script.steps.emplace_back(SegmentStart{"Return to rest"});
  std::sort(touched.begin(), touched.end());
  for (int axis : touched) script.steps.emplace_back(Move{axis, neutral.at(axis), 800});
  if (touched.empty()) script.steps.emplace_back(Wait{500});
  return serialize(script);
}

// Pulls unindented script statements out of a prompt and parses them.
std::optional<MotionScript> embedded_script(std::string_view text) {
  std::string collected;
  for (const auto line : detail::split_lines(text)) {
    if (line.starts_with("motion \"") || line.starts_with("segment \"") || line.starts_with("move ") ||
        line.starts_with("wait ")) {
      collected.append(line).push_back('\n');
    }
  }
  auto parsed = parse(collected);
  if (!parsed) return std::nullopt;
  return parsed.value();
}

std::string synthetic_revision(const ChatRequest& request) {
  const auto nl = request.subject.find('\n');
  const std::string label = request.subject.substr(0, nl);
  const std::string feedback = detail::to_lower(nl == std::string::npos ? "" : request.subject.substr(nl + 1));
  auto script = embedded_script(request.user);
  if (!script) return synthetic_script(synthetic_description(label), label);

  const bool calmer = feedback.find("less") != std::string::npos || feedback.find("gentl") != std::string::npos ||
                      feedback.find("soft") != std::string::npos || feedback.find("calm") != std::string::npos;
  const double gain = calmer ? 0.7 : 1.3;
  const Pose neutral = neutral_pose();
  for (auto& step : script->steps) {
    if (auto* move = std::get_if<Move>(&step)) {
      const int base = neutral.at(move->axis);
      const double scaled = base + (move->target - base) * gain;
      move->target = std::clamp(static_cast<int>(scaled + (scaled >= 0 ? 0.5 : -0.5)), 0, 255);
    }
  }
  return serialize(*script);
}

struct Persona {
  const char* name;
  std::array<const char*, 5> lines;
};

// Vocabulary is kept largely disjoint across sentences so that distinct
// replies embed far apart.
constexpr Persona kPersonas[] = {
    {"Xiao",
     {"Entropy quietly explains why spilled coffee never unspills.",
      "Quantum fields ripple beneath every ordinary tabletop.",
      "Gravity bends starlight around massive galaxies.",
      "Measurement collapses possibilities toward one definite outcome.",
      "Symmetry principles predict particles nobody has seen yet."}},
    {"Samantha",
     {"Catalysts lower activation barriers without being consumed.",
      "Crystals grow layer upon layer from saturated solutions.",
      "Oxidation turns iron flaky and reddish.",
      "Polymers coil like tangled spaghetti strands.",
      "Enzymes fold precisely, otherwise chemistry stalls."}},
    {"Amin",
     {"Recursion solves problems by calling itself on smaller pieces.",
      "Compilers translate human ideas toward machine instructions.",
      "Elegant algorithms hide ugly edge cases.",
      "Version control remembers mistakes so people can forget them.",
      "Debugging teaches humility faster than any textbook."}},
    {"Rilke",
     {"Autumn leaves whisper verses only patient listeners hear.",
      "Solitude shapes longing like clay.",
      "Roses bloom hardest beside thorny silence.",
      "Each sunset writes elegies across evening clouds.",
      "Memory is a river carrying unfinished poems."}},
    {"Turrell",
     {"Light itself becomes sculpture inside darkened rooms.",
      "Color shifts depending on what surrounds it.",
      "Perception paints skies differently for everyone watching.",
      "Empty canvases invite fearless experimentation.",
      "Museums should let visitors lie down and stare upward."}},
    {"Julia",
     {"Dinosaurs probably had feathers, right?",
      "Puppies deserve unlimited cuddles forever!",
      "Rainbows appear whenever sunshine meets drizzle.",
      "Homework feels endless during sunny afternoons.",
      "Can robots dream about cupcakes?"}},
};

constexpr std::array<const char*, 4> kFarewells = {
    "Goodbye, everyone!",
    "Well, good-bye for now.",
    "Farewell, friends.",
    "Bye, see you tomorrow.",
};

constexpr std::array<const char*, 5> kGenericLines = {
    "Interesting thought, tell me more.",
    "Curiosity keeps conversations alive.",
    "Questions matter more than answers sometimes.",
    "Stories connect strangers quickly.",
    "Listening carefully changes minds.",
};

bool mentions_farewell(std::string_view text) {
  const std::string lower = detail::to_lower(text);
  for (const char* word : {"goodbye", "good-bye", "farewell", "bye", "see you"}) {
    if (lower.find(word) != std::string::npos) return true;
  }
  return false;
}

// Subject layout for turns: "<name>|<turn>\n<speaker>: <text>\n...".
std::string synthetic_turn(const ChatRequest& request) {
  const auto nl = request.subject.find('\n');
  const std::string header = request.subject.substr(0, nl);
  const std::string name = header.substr(0, header.find('|'));
  std::size_t context_lines = 0;
  std::size_t farewells = 0;
  bool human_spoke = false;
  if (nl != std::string::npos) {
    for (const auto line : detail::split_lines(std::string_view(request.subject).substr(nl + 1))) {
      if (detail::trim(line).empty()) continue;
      ++context_lines;
      if (line.starts_with("human:")) human_spoke = true;
      if (mentions_farewell(line)) ++farewells;
    }
  }
  Dice dice(request.subject);
  const double fraction = context_lines ? static_cast<double>(farewells) / context_lines : 0.0;
  const double p_farewell = human_spoke ? 0.0 : std::min(0.97, 0.012 + 0.95 * fraction);
  if (dice.unit() < p_farewell) return kFarewells[dice.below(kFarewells.size())];
  for (const auto& persona : kPersonas) {
    if (name == persona.name) return persona.lines[dice.below(persona.lines.size())];
  }
  return kGenericLines[dice.below(kGenericLines.size())];
}

std::string synthetic_reflection(const ChatRequest& request) {
  const auto nl = request.subject.find('\n');
  const std::string name = request.subject.substr(0, nl);
  std::map<std::string, int> counts;
  std::string word;
  auto flush = [&] {
    if (word.size() > 4) ++counts[word];
    word.clear();
  };
  for (char c : nl == std::string::npos ? std::string() : request.subject.substr(nl + 1)) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word.push_back(detail::ascii_lower(c));
    } else {
      flush();
    }
  }
  flush();
  std::vector<std::pair<std::string, int>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::string topics;
  for (std::size_t i = 0; i < ranked.size() && i < 3; ++i) topics += (i ? ", " : "") + ranked[i].first;
  if (topics.empty()) topics = "nothing in particular yet";
  return name + " keeps returning to " + topics + ".";
}

}  // namespace

std::string SyntheticClient::send(const ChatRequest& request) {
  if (request.stage == stage::describe) return synthetic_description(request.subject);
  if (request.stage == stage::compile) {
    const auto first = request.subject.substr(0, request.subject.find('\n'));
    return synthetic_script(request.subject, first);
  }
  if (request.stage == stage::revise) return synthetic_revision(request);
  if (request.stage == stage::turn) return synthetic_turn(request);
  if (request.stage == stage::reflect) return synthetic_reflection(request);
  throw Error(Errc::missing_fixture, "synthetic client has no answer for stage '" + request.stage + "'");
}

}  // namespace alterforge
