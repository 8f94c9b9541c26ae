#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace alterforge {

inline constexpr std::string_view kHumanSpeaker = "human";

struct ChatTurn {
  int index = 0;
  std::string speaker;
  std::string text;
  std::optional<std::string> motion_label;
  std::optional<std::string> motion_id;
  std::optional<std::vector<double>> embedding;
};

using Transcript = std::vector<ChatTurn>;

// One object per line: {index, speaker, text, motion_label[, motion_id]}.
// Embeddings are not written.
nlohmann::json turn_to_json(const ChatTurn& turn);
ChatTurn turn_from_json(const nlohmann::json& doc);
void write_transcript_jsonl(std::ostream& out, const Transcript& transcript);
std::string transcript_to_jsonl(const Transcript& transcript);
// Accepts JSONL as written above, or plain text with one turn per line
// (`speaker: text` or bare text). Indices are renumbered from 0.
Transcript read_transcript(std::string_view text);
Transcript load_transcript(const std::string& path);

}  // namespace alterforge
