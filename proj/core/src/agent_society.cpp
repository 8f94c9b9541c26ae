#include "alterforge/agent_society.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "alterforge/error.hpp"
#include "text_util.hpp"

namespace alterforge {

std::vector<AgentProfile> default_profiles() {
  return {
      {"Xiao", "physicist", "You look for the mechanism behind everything."},
      {"Samantha", "chemist", "You think in reactions, mixtures and bonds."},
      {"Amin", "programmer", "You like clean abstractions and hate flaky builds."},
      {"Rilke", "poet", "You answer in images rather than arguments."},
      {"Turrell", "artist", "You care about light, space and how people perceive them."},
      {"Julia", "10 years old girl", "You are curious, blunt and easily excited."},
  };
}

std::string_view to_string(MemoryKind kind) noexcept {
  return kind == MemoryKind::observation ? "observation" : "reflection";
}

std::string_view to_string(SchedulerMode mode) noexcept {
  return mode == SchedulerMode::fixed_round_robin ? "fixed" : "random";
}

SchedulerMode parse_scheduler_mode(std::string_view text) {
  const auto lower = detail::to_lower(text);
  if (lower == "fixed" || lower == "fixed_round_robin") return SchedulerMode::fixed_round_robin;
  if (lower == "random" || lower == "uniform_random") return SchedulerMode::uniform_random;
  throw Error(Errc::invalid_argument, "scheduler mode must be 'fixed' or 'random', got '" + std::string(text) + "'");
}

// --- scheduler -----------------------------------------------------------------

Scheduler::Scheduler(std::size_t agents, SchedulerMode mode, std::uint64_t seed)
    : agents_(agents), mode_(mode), rng_(seed) {
  if (agents_ == 0) throw Error(Errc::invalid_argument, "scheduler needs at least one agent");
}

std::size_t Scheduler::next() {
  std::size_t pick = 0;
  if (mode_ == SchedulerMode::fixed_round_robin) {
    pick = cursor_;
    cursor_ = (cursor_ + 1) % agents_;
  } else if (agents_ == 1) {
    pick = 0;
  } else {
    // Uniform over the agents_ - 1 candidates; rejection keeps it unbiased.
    const std::uint64_t span = previous_ ? agents_ - 1 : agents_;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t draw = rng_();
    while (draw >= limit) draw = rng_();
    pick = static_cast<std::size_t>(draw % span);
    if (previous_ && pick >= *previous_) ++pick;
  }
  previous_ = pick;
  return pick;
}

// --- session config ------------------------------------------------------------

SessionConfig SessionConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(Errc::malformed, "session config must be an object");
  try {
    SessionConfig c;
    c.turns = doc.value("turns", c.turns);
    if (doc.contains("mode")) c.mode = parse_scheduler_mode(doc["mode"].get<std::string>());
    c.seed = doc.value("seed", c.seed);
    c.motion_hook = doc.value("motion_hook", c.motion_hook);
    c.motion_threshold = doc.value("motion_threshold", c.motion_threshold);
    for (const auto& h : doc.value("humans", nlohmann::json::array())) {
      c.human_queue.push_back({h.at("index").get<int>(), h.at("text").get<std::string>()});
    }
    if (c.turns < 1) throw Error(Errc::invalid_argument, "turns must be at least 1");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, std::string("bad session config: ") + e.what());
  }
}

nlohmann::json SessionConfig::to_json() const {
  nlohmann::json humans = nlohmann::json::array();
  for (const auto& h : human_queue) humans.push_back({{"index", h.index}, {"text", h.text}});
  return {{"turns", turns},
          {"mode", to_string(mode)},
          {"seed", seed},
          {"motion_hook", motion_hook},
          {"motion_threshold", motion_threshold},
          {"humans", std::move(humans)}};
}

// --- society -------------------------------------------------------------------

AgentSociety::AgentSociety(SessionConfig session, std::shared_ptr<const Embedder> embedder,
                           CompletionClient& client, MotionStore* motions, SocietyParams params,
                           std::vector<AgentProfile> profiles, const PromptTemplates& templates)
    : session_(std::move(session)),
      embedder_(std::move(embedder)),
      client_(client),
      motions_(motions),
      params_(std::move(params)),
      templates_(templates),
      scheduler_(std::max<std::size_t>(profiles.size(), 1), session_.mode, session_.seed) {
  if (profiles.empty()) throw Error(Errc::invalid_argument, "a society needs at least one agent");
  if (session_.turns < 1) throw Error(Errc::invalid_argument, "turns must be at least 1");
  if (!embedder_) throw Error(Errc::invalid_argument, "a society needs an embedder");
  for (auto& p : profiles) agents_.push_back(AgentState{std::move(p), {}});
  std::stable_sort(session_.human_queue.begin(), session_.human_queue.end(),
                   [](const HumanMessage& a, const HumanMessage& b) { return a.index < b.index; });
}

std::vector<ScoredMemory> AgentSociety::retrieve_memories(std::size_t agent, std::string_view query,
                                                          std::size_t m) const {
  const auto& memories = agents_.at(agent).memories;
  if (m == 0 || memories.empty()) return {};
  const auto q = embedder_->embed(query);
  const int now = static_cast<int>(transcript_.size());
  std::vector<ScoredMemory> scored;
  scored.reserve(memories.size());
  for (const auto& item : memories) {
    const double recency = std::exp(-static_cast<double>(now - item.timestamp) / params_.gamma);
    const double relevance = cosine(q, item.embedding);
    scored.push_back({&item, params_.alpha * recency + params_.beta * relevance});
  }
  // Later items first among equal scores; the sort is stable over the reversed order.
  std::reverse(scored.begin(), scored.end());
  std::stable_sort(scored.begin(), scored.end(), [](const ScoredMemory& a, const ScoredMemory& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item->timestamp > b.item->timestamp;
  });
  if (scored.size() > m) scored.resize(m);
  return scored;
}

std::string AgentSociety::context_block() const {
  std::string out;
  const auto w = params_.context_window;
  const auto first = transcript_.size() > w ? transcript_.size() - w : 0;
  for (auto i = first; i < transcript_.size(); ++i) {
    out += transcript_[i].speaker + ": " + transcript_[i].text + "\n";
  }
  return out;
}

std::string AgentSociety::render_turn_prompt(std::size_t agent) const {
  const auto& profile = agents_.at(agent).profile;
  const std::string query = transcript_.empty() ? std::string() : transcript_.back().text;
  std::string memories;
  const auto top = retrieve_memories(agent, query, params_.top_m);
  if (!top.empty()) {
    memories = "Things you remember:\n";
    for (const auto& s : top) memories += "- " + s.item->text + "\n";
    memories += "\n";
  }
  std::string context = context_block();
  if (context.empty()) context = "(nobody has spoken yet)\n";
  return render_template(templates_.agent_turn, {{"name", profile.name},
                                                 {"occupation", profile.occupation},
                                                 {"traits", profile.traits},
                                                 {"turn", std::to_string(transcript_.size())},
                                                 {"memories", memories},
                                                 {"context", context}});
}

std::string AgentSociety::send_with_retry(const ChatRequest& request) {
  for (int attempt = 0;; ++attempt) {
    try {
      return client_.send(request);
    } catch (const Error& e) {
      if (e.code() != Errc::transport || attempt >= params_.transport_retries) throw;
    }
  }
}

namespace {

// Single line, without a leading "Name:" the model may have added.
std::string clean_reply(std::string_view text, std::string_view name) {
  std::string flat;
  for (const auto line : detail::split_lines(text)) {
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (!flat.empty()) flat.push_back(' ');
    flat.append(t);
  }
  const std::string prefix = std::string(name) + ":";
  if (flat.starts_with(prefix)) flat = std::string(detail::trim(std::string_view(flat).substr(prefix.size())));
  return flat;
}

}  // namespace

ChatTurn AgentSociety::take_turn(std::size_t agent) {
  const auto& profile = agents_.at(agent).profile;
  ChatRequest request;
  request.model = params_.pipeline.model;
  request.temperature = params_.turn_temperature;
  request.system = "You are one voice in a conversation between several personalities.";
  request.user = render_turn_prompt(agent);
  request.max_tokens = 200;
  request.stage = std::string(stage::turn);
  request.subject = profile.name + "|" + std::to_string(transcript_.size()) + "\n" + context_block();
  const auto reply = clean_reply(send_with_retry(request), profile.name);
  if (reply.empty()) throw Error(Errc::empty_completion, profile.name + " produced an empty reply");
  return append(profile.name, reply);
}

ChatTurn AgentSociety::add_human_turn(std::string_view text) {
  const std::string cleaned = clean_reply(text, kHumanSpeaker);
  if (cleaned.empty()) throw Error(Errc::invalid_argument, "human message must not be empty");
  return append(std::string(kHumanSpeaker), cleaned);
}

ChatTurn AgentSociety::append(std::string speaker, std::string text) {
  ChatTurn turn;
  turn.index = static_cast<int>(transcript_.size());
  turn.speaker = std::move(speaker);
  turn.text = std::move(text);
  turn.embedding = embedder_->embed(turn.text);
  if (session_.motion_hook && motions_ != nullptr) attach_motion(turn);
  transcript_.push_back(turn);

  MemoryItem observation{turn.speaker + ": " + turn.text, turn.index, params_.observation_importance,
                         MemoryKind::observation, embedder_->embed(turn.speaker + ": " + turn.text)};
  for (auto& a : agents_) a.memories.push_back(observation);

  if (params_.reflect_every > 0 && transcript_.size() % static_cast<std::size_t>(params_.reflect_every) == 0) {
    for (std::size_t i = 0; i < agents_.size(); ++i) reflect(i);
  }
  return turn;
}

void AgentSociety::attach_motion(ChatTurn& turn) {
  const auto hits = motions_->retrieve(turn.text, 1, session_.motion_threshold);
  if (!hits.empty()) {
    turn.motion_label = hits.front().record.label;
    turn.motion_id = hits.front().record.id;
    return;
  }
  try {
    auto generated = generate(turn.text, client_, params_.pipeline, motions_->table(), templates_);
    const auto record = motions_->store(turn.text, std::move(generated.description), std::move(generated.script),
                                        generated.provenance.to_json());
    turn.motion_label = record.label;
    turn.motion_id = record.id;
  } catch (const Error& e) {
    // A turn without a gesture is acceptable; transport failures are not.
    if (e.code() == Errc::transport) throw;
  }
}

MemoryItem AgentSociety::reflect(std::size_t agent) {
  auto& state = agents_.at(agent);
  const bool has_observation = std::any_of(state.memories.begin(), state.memories.end(), [](const MemoryItem& m) {
    return m.kind == MemoryKind::observation;
  });
  if (!has_observation) throw Error(Errc::invalid_state, state.profile.name + " has nothing to reflect on");

  const std::size_t span = params_.reflect_every > 0 ? static_cast<std::size_t>(params_.reflect_every) : 25;
  const auto first = state.memories.size() > span ? state.memories.size() - span : 0;
  std::string recent;
  for (auto i = first; i < state.memories.size(); ++i) recent += state.memories[i].text + "\n";

  ChatRequest request;
  request.model = params_.pipeline.model;
  request.temperature = params_.pipeline.temp2;
  request.system = "You condense memories into short insights.";
  request.user = render_template(templates_.reflect, {{"name", state.profile.name},
                                                      {"occupation", state.profile.occupation},
                                                      {"memories", recent}});
  request.max_tokens = 120;
  request.stage = std::string(stage::reflect);
  request.subject = state.profile.name + "\n" + recent;
  auto text = clean_reply(send_with_retry(request), state.profile.name);
  if (text.empty()) throw Error(Errc::empty_completion, "empty reflection");
  MemoryItem item{text, static_cast<int>(transcript_.empty() ? 0 : transcript_.size() - 1),
                  params_.reflection_importance, MemoryKind::reflection, embedder_->embed(text)};
  state.memories.push_back(item);
  return item;
}

ChatTurn AgentSociety::advance() {
  const int index = static_cast<int>(transcript_.size());
  for (const auto& h : session_.human_queue) {
    if (h.index == index) return add_human_turn(h.text);
  }
  return take_turn(next_speaker());
}

Transcript AgentSociety::run() {
  while (!done()) advance();
  return transcript_;
}

}  // namespace alterforge
