#include "alterforge/motion_memory.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>

#include "text_util.hpp"

namespace alterforge {

std::string_view to_string(RevisionKind kind) noexcept {
  return kind == RevisionKind::direct_edit ? "direct_edit" : "llm_revision";
}

namespace {

RevisionKind parse_revision_kind(const std::string& text) {
  if (text == "direct_edit") return RevisionKind::direct_edit;
  if (text == "llm_revision") return RevisionKind::llm_revision;
  throw Error(Errc::malformed, "unknown revision kind '" + text + "'");
}

MotionScript parse_stored_script(const std::string& text, BodyTable table) {
  auto parsed = parse(text, table);
  if (!parsed) throw Error(Errc::malformed, "stored script does not parse: " + parsed.error().describe());
  return std::move(parsed).value();
}

std::string content_text(std::string_view label, const MotionDescription& description) {
  std::string text(label);
  for (const auto& line : description.lines) {
    text.push_back('\n');
    text.append(line);
  }
  return text;
}

void check_script(const MotionScript& script, BodyTable table) {
  const auto issues = validate(script, table);
  if (has_errors(issues)) {
    const auto first = std::find_if(issues.begin(), issues.end(),
                                    [](const ValidationIssue& i) { return i.severity == Severity::error; });
    throw Error(Errc::invalid_script, "script does not validate: " + first->message);
  }
}

}  // namespace

nlohmann::json record_to_json(const MotionRecord& record) {
  nlohmann::json revisions = nlohmann::json::array();
  for (const auto& rev : record.revisions) {
    revisions.push_back({{"feedback_text", rev.feedback_text},
                         {"kind", to_string(rev.kind)},
                         {"prior_script_text", serialize(rev.prior_script)},
                         {"new_script_text", serialize(rev.new_script)},
                         {"timestamp", rev.timestamp}});
  }
  return {{"id", record.id},
          {"label", record.label},
          {"description_lines", record.description.lines},
          {"script_text", serialize(record.script)},
          {"embedding", record.embedding},
          {"label_embedding", record.label_embedding},
          {"revisions", std::move(revisions)},
          {"provenance", record.provenance},
          {"timestamps", {{"created_at", record.created_at}, {"updated_at", record.updated_at}}}};
}

MotionRecord record_from_json(const nlohmann::json& doc, BodyTable table) {
  try {
    MotionRecord record;
    record.id = doc.at("id").get<std::string>();
    record.label = doc.at("label").get<std::string>();
    record.description.lines = doc.at("description_lines").get<std::vector<std::string>>();
    record.script = parse_stored_script(doc.at("script_text").get<std::string>(), table);
    record.embedding = doc.at("embedding").get<std::vector<double>>();
    record.label_embedding = doc.value("label_embedding", std::vector<double>{});
    for (const auto& rev : doc.value("revisions", nlohmann::json::array())) {
      Revision r;
      r.feedback_text = rev.at("feedback_text").get<std::string>();
      r.kind = parse_revision_kind(rev.at("kind").get<std::string>());
      r.prior_script = parse_stored_script(rev.at("prior_script_text").get<std::string>(), table);
      r.new_script = parse_stored_script(rev.at("new_script_text").get<std::string>(), table);
      r.timestamp = rev.value("timestamp", std::int64_t{0});
      record.revisions.push_back(std::move(r));
    }
    record.provenance = doc.value("provenance", nlohmann::json::object());
    if (doc.contains("timestamps")) {
      record.created_at = doc["timestamps"].value("created_at", std::int64_t{0});
      record.updated_at = doc["timestamps"].value("updated_at", std::int64_t{0});
    }
    if (record.label.empty()) throw Error(Errc::malformed, "record " + record.id + " has an empty label");
    return record;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, std::string("bad motion record: ") + e.what());
  }
}

std::optional<DirectEdit> parse_direct_command(std::string_view feedback) {
  static const std::regex pattern(
      R"re(^\s*set\s+axis\s+(\d{1,9})\s+to\s+(\d{1,9})(?:\s+(?:in|for|during)\s+(?:the\s+)?(?:segment\s+)?"((?:[^"\\]|\\.)*)"(?:\s+segment)?)?\s*[.!]?\s*$)re",
      std::regex::ECMAScript | std::regex::icase);
  const std::string text(feedback);
  std::smatch m;
  if (!std::regex_match(text, m, pattern)) return std::nullopt;
  DirectEdit edit;
  edit.axis = std::stoi(m[1].str());
  edit.target = std::stoi(m[2].str());
  if (m[3].matched) {
    std::string label;
    const std::string raw = m[3].str();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '\\' && i + 1 < raw.size()) ++i;
      label.push_back(raw[i]);
    }
    edit.segment = std::move(label);
  }
  return edit;
}

Clock system_clock() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

MotionStore::MotionStore(std::shared_ptr<const Embedder> embedder, std::optional<std::filesystem::path> file,
                         Clock clock, BodyTable table)
    : embedder_(std::move(embedder)), file_(std::move(file)), clock_(std::move(clock)), table_(table) {
  if (!embedder_) throw Error(Errc::invalid_argument, "motion store needs an embedder");
  if (!clock_) clock_ = system_clock();
}

std::unique_ptr<MotionStore> MotionStore::open(const std::filesystem::path& file,
                                               std::shared_ptr<const Embedder> embedder, Clock clock) {
  auto store = std::make_unique<MotionStore>(std::move(embedder), std::nullopt, std::move(clock));
  std::error_code ec;
  if (std::filesystem::exists(file, ec)) store->import_store(file);
  store->file_ = file;
  return store;
}

const MotionRecord* MotionStore::find_locked(std::string_view id) const {
  for (const auto& r : records_) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::string MotionStore::next_id_locked() {
  char buf[32];
  for (;;) {
    std::snprintf(buf, sizeof buf, "m-%06llu", static_cast<unsigned long long>(next_id_++));
    if (find_locked(buf) == nullptr) return buf;
  }
}

MotionRecord MotionStore::store(std::string_view label, MotionDescription description, MotionScript script,
                                nlohmann::json provenance) {
  if (detail::trim(label).empty()) throw Error(Errc::invalid_argument, "label must not be empty");
  check_script(script, table_);
  MotionRecord record;
  record.label = std::string(label);
  record.embedding = embedder_->embed(content_text(label, description));
  record.label_embedding = embedder_->embed(label);
  record.description = std::move(description);
  record.script = std::move(script);
  record.provenance = provenance.is_null() ? nlohmann::json::object() : std::move(provenance);

  std::unique_lock lock(mutex_);
  record.id = next_id_locked();
  record.created_at = record.updated_at = clock_();
  records_.push_back(record);
  try {
    persist_locked();
  } catch (...) {
    records_.pop_back();
    throw;
  }
  return record;
}

std::optional<MotionRecord> MotionStore::get(std::string_view id) const {
  std::shared_lock lock(mutex_);
  if (const auto* r = find_locked(id)) return *r;
  return std::nullopt;
}

MotionRecord MotionStore::fetch(std::string_view id) const {
  auto record = get(id);
  if (!record) throw Error(Errc::unknown_record, "no motion with id '" + std::string(id) + "'");
  return std::move(*record);
}

std::vector<MotionRecord> MotionStore::list() const {
  std::shared_lock lock(mutex_);
  return records_;
}

std::size_t MotionStore::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

std::vector<RetrievalHit> MotionStore::retrieve(std::string_view query, std::size_t k, double threshold) const {
  if (k < 1) throw Error(Errc::invalid_argument, "k must be at least 1");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(Errc::invalid_argument, "threshold must be in [0, 1]");
  const auto q = embedder_->embed(query);

  struct Scored {
    double score;
    std::size_t position;
  };
  std::vector<Scored> scored;
  std::shared_lock lock(mutex_);
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    double score = cosine(q, r.embedding);
    if (r.label_embedding.size() == q.size()) score = std::max(score, cosine(q, r.label_embedding));
    if (score >= threshold) scored.push_back({score, i});
  }
  std::sort(scored.begin(), scored.end(), [&](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    const auto& ra = records_[a.position];
    const auto& rb = records_[b.position];
    if (ra.created_at != rb.created_at) return ra.created_at > rb.created_at;
    return a.position > b.position;
  });
  if (scored.size() > k) scored.resize(k);
  std::vector<RetrievalHit> hits;
  hits.reserve(scored.size());
  for (const auto& s : scored) hits.push_back({records_[s.position], s.score});
  return hits;
}

MotionRecord MotionStore::apply_edit(std::string_view id, const DirectEdit& edit, std::string_view feedback_text) {
  const auto snapshot = fetch(id);
  auto result = apply_direct_edit(snapshot.script, edit, table_);
  check_script(result.script, table_);
  Revision revision{std::string(feedback_text), RevisionKind::direct_edit, snapshot.script, std::move(result.script), 0};
  return commit_revision(id, snapshot.revisions.size(), std::move(revision));
}

MotionRecord MotionStore::revise(std::string_view id, std::string_view feedback, CompletionClient& client,
                                 const PipelineConfig& config, const PromptTemplates& templates) {
  if (detail::trim(feedback).empty()) throw Error(Errc::invalid_argument, "feedback must not be empty");
  if (auto edit = parse_direct_command(feedback)) return apply_edit(id, *edit, feedback);

  // No lock is held while the model works; the commit fails with `conflict`
  // if another revision landed in the meantime.
  const auto snapshot = fetch(id);
  auto outcome = revise_script(snapshot.script, snapshot.label, feedback, table_, client, config, templates);
  Revision revision{std::string(feedback), RevisionKind::llm_revision, snapshot.script, std::move(outcome.script), 0};
  return commit_revision(id, snapshot.revisions.size(), std::move(revision));
}

MotionRecord MotionStore::commit_revision(std::string_view id, std::size_t expected_revisions, Revision revision) {
  std::unique_lock lock(mutex_);
  auto it = std::find_if(records_.begin(), records_.end(), [&](const MotionRecord& r) { return r.id == id; });
  if (it == records_.end()) throw Error(Errc::unknown_record, "no motion with id '" + std::string(id) + "'");
  if (it->revisions.size() != expected_revisions) {
    throw Error(Errc::conflict, "motion '" + std::string(id) + "' was revised concurrently");
  }
  const MotionRecord before = *it;
  revision.timestamp = clock_();
  it->script = revision.new_script;
  it->updated_at = revision.timestamp;
  it->revisions.push_back(std::move(revision));
  try {
    persist_locked();
  } catch (...) {
    *it = before;
    throw;
  }
  return *it;
}

nlohmann::json MotionStore::to_json_locked() const {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : records_) records.push_back(record_to_json(r));
  return {{"version", kStoreSchemaVersion}, {"records", std::move(records)}};
}

nlohmann::json MotionStore::to_json() const {
  std::shared_lock lock(mutex_);
  return to_json_locked();
}

namespace {

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::storage_io, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(Errc::storage_io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::storage_io, "cannot replace " + path.string() + ": " + ec.message());
}

}  // namespace

void MotionStore::persist_locked() const {
  if (!file_) return;
  write_atomically(*file_, to_json_locked().dump(2) + "\n");
}

std::size_t MotionStore::export_store(const std::filesystem::path& path) const {
  std::shared_lock lock(mutex_);
  write_atomically(path, to_json_locked().dump(2) + "\n");
  return records_.size();
}

std::size_t MotionStore::import_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::storage_io, "cannot read " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, path.string() + ": " + e.what());
  }
  return import_json(doc);
}

std::size_t MotionStore::import_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("version") || !doc["version"].is_number_integer()) {
    throw Error(Errc::malformed, "store document needs an integer 'version'");
  }
  if (doc["version"].get<int>() != kStoreSchemaVersion) {
    throw Error(Errc::schema_version_mismatch,
                "store schema version " + doc["version"].dump() + " is not supported (expected 1)");
  }
  std::vector<MotionRecord> incoming;
  for (const auto& item : doc.value("records", nlohmann::json::array())) {
    auto record = record_from_json(item, table_);
    check_script(record.script, table_);
    // Embeddings from a different embedder are recomputed.
    if (record.embedding.size() != embedder_->dimension()) {
      record.embedding = embedder_->embed(content_text(record.label, record.description));
    }
    if (record.label_embedding.size() != embedder_->dimension()) {
      record.label_embedding = embedder_->embed(record.label);
    }
    incoming.push_back(std::move(record));
  }

  std::unique_lock lock(mutex_);
  const auto before = records_;
  const auto before_next = next_id_;
  for (auto& record : incoming) {
    unsigned long long n = 0;
    if (std::sscanf(record.id.c_str(), "m-%llu", &n) == 1) next_id_ = std::max<std::uint64_t>(next_id_, n + 1);
    if (record.id.empty() || find_locked(record.id) != nullptr) record.id = next_id_locked();
    records_.push_back(std::move(record));
  }
  try {
    persist_locked();
  } catch (...) {
    records_ = before;
    next_id_ = before_next;
    throw;
  }
  return incoming.size();
}

}  // namespace alterforge
