#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "alterforge/body_model.hpp"
#include "alterforge/completion.hpp"
#include "alterforge/embedder.hpp"
#include "alterforge/llm_pipeline.hpp"
#include "alterforge/motion_script.hpp"

namespace alterforge {

inline constexpr int kStoreSchemaVersion = 1;
inline constexpr double kDefaultRetrievalThreshold = 0.35;

enum class RevisionKind { direct_edit, llm_revision };
std::string_view to_string(RevisionKind kind) noexcept;

struct Revision {
  std::string feedback_text;
  RevisionKind kind = RevisionKind::direct_edit;
  MotionScript prior_script;
  MotionScript new_script;
  std::int64_t timestamp = 0;  // ms since epoch
};

struct MotionRecord {
  std::string id;
  std::string label;
  MotionDescription description;
  MotionScript script;
  std::vector<double> embedding;        // label + description
  std::vector<double> label_embedding;  // label alone
  std::vector<Revision> revisions;
  nlohmann::json provenance = nlohmann::json::object();
  std::int64_t created_at = 0;
  std::int64_t updated_at = 0;
};

nlohmann::json record_to_json(const MotionRecord& record);
MotionRecord record_from_json(const nlohmann::json& doc, BodyTable table = default_table());

struct RetrievalHit {
  MotionRecord record;
  double score = 0.0;
};

// Recognises `set axis <n> to <v>` with an optional trailing segment clause
// (`in segment "<label>"`, `for "<label>"`). Case-insensitive.
std::optional<DirectEdit> parse_direct_command(std::string_view feedback);

using Clock = std::function<std::int64_t()>;
Clock system_clock();

// Labeled store of motions. Mutations are serialised; readers work on copies.
// When a backing file is set, every mutation rewrites it atomically.
class MotionStore {
 public:
  explicit MotionStore(std::shared_ptr<const Embedder> embedder,
                       std::optional<std::filesystem::path> file = std::nullopt, Clock clock = system_clock(),
                       BodyTable table = default_table());

  // Loads `file` when it exists; otherwise starts empty and creates it on first write.
  static std::unique_ptr<MotionStore> open(const std::filesystem::path& file, std::shared_ptr<const Embedder> embedder,
                                           Clock clock = system_clock());

  MotionRecord store(std::string_view label, MotionDescription description, MotionScript script,
                     nlohmann::json provenance = nlohmann::json::object());

  std::optional<MotionRecord> get(std::string_view id) const;
  MotionRecord fetch(std::string_view id) const;  // throws unknown_record
  std::vector<MotionRecord> list() const;
  std::size_t size() const;

  // Score per record is the larger of the query's cosine against the content
  // embedding and against the label embedding. Ties go to the newer record.
  std::vector<RetrievalHit> retrieve(std::string_view query, std::size_t k = 1,
                                     double threshold = kDefaultRetrievalThreshold) const;

  // Direct commands never reach `client`; other feedback goes through an LLM
  // rewrite with the script-stage repair loop.
  MotionRecord revise(std::string_view id, std::string_view feedback, CompletionClient& client,
                      const PipelineConfig& config = {},
                      const PromptTemplates& templates = PromptTemplates::builtin());
  MotionRecord apply_edit(std::string_view id, const DirectEdit& edit, std::string_view feedback_text);

  nlohmann::json to_json() const;
  std::size_t export_store(const std::filesystem::path& path) const;
  // Adds every record of the document. Ids already present get fresh ones.
  std::size_t import_store(const std::filesystem::path& path);
  std::size_t import_json(const nlohmann::json& doc);

  const Embedder& embedder() const noexcept { return *embedder_; }
  BodyTable table() const noexcept { return table_; }

 private:
  MotionRecord commit_revision(std::string_view id, std::size_t expected_revisions, Revision revision);
  void persist_locked() const;
  nlohmann::json to_json_locked() const;
  std::string next_id_locked();
  const MotionRecord* find_locked(std::string_view id) const;

  std::shared_ptr<const Embedder> embedder_;
  std::optional<std::filesystem::path> file_;
  Clock clock_;
  BodyTable table_;
  mutable std::shared_mutex mutex_;
  std::vector<MotionRecord> records_;
  std::uint64_t next_id_ = 1;
};

}  // namespace alterforge
