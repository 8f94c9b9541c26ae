#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "alterforge/completion.hpp"
#include "alterforge/embedder.hpp"
#include "alterforge/llm_pipeline.hpp"
#include "alterforge/motion_memory.hpp"
#include "alterforge/transcript.hpp"

namespace alterforge {

struct AgentProfile {
  std::string name;
  std::string occupation;
  std::string traits;
};

// Xiao, Samantha, Amin, Rilke, Turrell and Julia.
std::vector<AgentProfile> default_profiles();

enum class MemoryKind { observation, reflection };
std::string_view to_string(MemoryKind kind) noexcept;

struct MemoryItem {
  std::string text;
  int timestamp = 0;  // turn index
  double importance = 0.5;
  MemoryKind kind = MemoryKind::observation;
  std::vector<double> embedding;
};

struct AgentState {
  AgentProfile profile;
  std::vector<MemoryItem> memories;  // append-only
};

enum class SchedulerMode { fixed_round_robin, uniform_random };
std::string_view to_string(SchedulerMode mode) noexcept;
SchedulerMode parse_scheduler_mode(std::string_view text);  // "fixed" | "random" (and the long names)

// Fixed mode cycles in profile order. Random mode draws uniformly among the
// agents other than the previous speaker, from a seeded mt19937_64.
class Scheduler {
 public:
  Scheduler(std::size_t agents, SchedulerMode mode, std::uint64_t seed);
  std::size_t next();

 private:
  std::size_t agents_;
  SchedulerMode mode_;
  std::mt19937_64 rng_;
  std::size_t cursor_ = 0;
  std::optional<std::size_t> previous_;
};

struct HumanMessage {
  int index = 0;
  std::string text;
};

struct SessionConfig {
  int turns = 12;
  SchedulerMode mode = SchedulerMode::uniform_random;
  std::uint64_t seed = 1;
  std::vector<HumanMessage> human_queue;
  bool motion_hook = true;
  double motion_threshold = kDefaultRetrievalThreshold;

  // {"turns", "mode", "seed", "motion_hook", "motion_threshold", "humans": [{"index", "text"}]}
  static SessionConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

struct SocietyParams {
  double alpha = 0.3;   // recency weight
  double beta = 0.7;    // relevance weight
  double gamma = 50.0;  // recency decay, in turns
  std::size_t top_m = 5;
  std::size_t context_window = 10;
  int reflect_every = 25;
  double observation_importance = 0.5;
  double reflection_importance = 0.9;
  int transport_retries = 2;
  double turn_temperature = 0.7;
  PipelineConfig pipeline;
};

struct ScoredMemory {
  const MemoryItem* item;
  double score;
};

// A conversation among profiled agents. Not thread-safe; one owner per session.
class AgentSociety {
 public:
  AgentSociety(SessionConfig session, std::shared_ptr<const Embedder> embedder, CompletionClient& client,
               MotionStore* motions = nullptr, SocietyParams params = {},
               std::vector<AgentProfile> profiles = default_profiles(),
               const PromptTemplates& templates = PromptTemplates::builtin());

  const std::vector<AgentState>& agents() const noexcept { return agents_; }
  const Transcript& transcript() const noexcept { return transcript_; }
  const SessionConfig& config() const noexcept { return session_; }
  bool done() const noexcept { return static_cast<int>(transcript_.size()) >= session_.turns; }

  std::size_t next_speaker() { return scheduler_.next(); }

  // Top `m` memories of `agent` for `query` by alpha*recency + beta*relevance,
  // recency = exp(-(now - t) / gamma). Ties fall back to recency.
  std::vector<ScoredMemory> retrieve_memories(std::size_t agent, std::string_view query, std::size_t m) const;

  std::string render_turn_prompt(std::size_t agent) const;

  // One agent reply appended to the transcript.
  ChatTurn take_turn(std::size_t agent);
  // A human message appended to the transcript.
  ChatTurn add_human_turn(std::string_view text);
  MemoryItem reflect(std::size_t agent);

  // Next turn of the session: a queued human message when one is scheduled
  // at this index, otherwise the scheduler's pick.
  ChatTurn advance();
  Transcript run();

 private:
  ChatTurn append(std::string speaker, std::string text);
  std::string send_with_retry(const ChatRequest& request);
  void attach_motion(ChatTurn& turn);
  std::string context_block() const;

  SessionConfig session_;
  std::shared_ptr<const Embedder> embedder_;
  CompletionClient& client_;
  MotionStore* motions_;
  SocietyParams params_;
  const PromptTemplates& templates_;
  std::vector<AgentState> agents_;
  Scheduler scheduler_;
  Transcript transcript_;
};

}  // namespace alterforge
