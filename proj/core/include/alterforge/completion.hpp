#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace alterforge {

// Stage tags carried on every request. Live endpoints ignore them; offline
// clients key their answers on them.
namespace stage {
inline constexpr std::string_view describe = "describe";
inline constexpr std::string_view compile = "compile";
inline constexpr std::string_view revise = "revise";
inline constexpr std::string_view turn = "turn";
inline constexpr std::string_view reflect = "reflect";
}  // namespace stage

struct ChatRequest {
  std::string model;
  double temperature = 0.7;
  std::string system;
  std::string user;
  int max_tokens = 1024;

  std::string stage;    // see alterforge::stage
  std::string subject;  // instruction, description text, ... (fixture key input)
  int attempt = 0;      // 0 for the first try, n for the n-th repair

  void validate() const;  // temperature in [0, 2], prompts non-empty
};

// Thread-safe by contract: implementations may be called concurrently.
// Transport failures throw Error(Errc::transport).
class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  virtual std::string send(const ChatRequest& request) = 0;
};

// `stage[#attempt]:<fnv1a64(subject) as 16 hex digits>`
std::string fixture_key(std::string_view stage, std::string_view subject, int attempt = 0);
std::string fixture_key(const ChatRequest& request);

// Replays recorded completions. Unknown keys throw missing_fixture.
class FixtureClient final : public CompletionClient {
 public:
  explicit FixtureClient(std::map<std::string, std::string> fixtures);

  // Document layout:
  //   {"version": 1, "fixtures": [{"stage": "...", "subject": "..." | "subject_lines": [...],
  //     "attempt": 0, "completion": "..." | "completion_file": "relative/path"}]}
  static FixtureClient from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  static FixtureClient from_file(const std::filesystem::path& path);

  std::string send(const ChatRequest& request) override;
  bool contains(const ChatRequest& request) const;
  std::size_t size() const noexcept { return fixtures_.size(); }

 private:
  std::map<std::string, std::string> fixtures_;
};

std::unique_ptr<CompletionClient> mock_client(std::map<std::string, std::string> fixtures);

// Decorator counting every call that reaches the wrapped client.
class CountingClient final : public CompletionClient {
 public:
  explicit CountingClient(CompletionClient& inner) : inner_(inner) {}
  std::string send(const ChatRequest& request) override;
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  CompletionClient& inner_;
  std::atomic<std::size_t> calls_{0};
};

// Deterministic offline stand-in for a chat model. Answers every stage with
// text that the pipeline accepts: numbered descriptions, valid scripts built
// from a description, energised revisions, short in-character turns. Turn
// replies drift toward farewells when the recent context is already full of
// them and no human has spoken.
class SyntheticClient final : public CompletionClient {
 public:
  std::string send(const ChatRequest& request) override;
};

// Tries `primary`; on missing_fixture falls through to `fallback`.
class FallbackClient final : public CompletionClient {
 public:
  FallbackClient(std::shared_ptr<CompletionClient> primary, std::shared_ptr<CompletionClient> fallback)
      : primary_(std::move(primary)), fallback_(std::move(fallback)) {}
  std::string send(const ChatRequest& request) override;

 private:
  std::shared_ptr<CompletionClient> primary_;
  std::shared_ptr<CompletionClient> fallback_;
};

// Any chat-completions compatible endpoint. `base_url` like
// `https://api.example.com/v1`; requests go to `<base_url>/chat/completions`.
class HttpCompletionClient final : public CompletionClient {
 public:
  HttpCompletionClient(std::string base_url, std::string api_key, int timeout_s = 120);

  // Reads ALTERFORGE_LLM_URL and ALTERFORGE_LLM_KEY; throws invalid_argument if unset.
  static std::unique_ptr<HttpCompletionClient> from_environment();

  std::string send(const ChatRequest& request) override;

 private:
  std::string base_url_;
  std::string api_key_;
  int timeout_s_;
};

}  // namespace alterforge
