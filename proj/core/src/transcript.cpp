#include "alterforge/transcript.hpp"

#include <fstream>
#include <sstream>

#include "alterforge/error.hpp"
#include "text_util.hpp"

namespace alterforge {

nlohmann::json turn_to_json(const ChatTurn& turn) {
  nlohmann::json doc = {{"index", turn.index},
                        {"speaker", turn.speaker},
                        {"text", turn.text},
                        {"motion_label", turn.motion_label ? nlohmann::json(*turn.motion_label) : nlohmann::json()}};
  if (turn.motion_id) doc["motion_id"] = *turn.motion_id;
  return doc;
}

ChatTurn turn_from_json(const nlohmann::json& doc) {
  try {
    ChatTurn turn;
    turn.index = doc.value("index", 0);
    turn.speaker = doc.value("speaker", "");
    turn.text = doc.at("text").get<std::string>();
    if (doc.contains("motion_label") && doc["motion_label"].is_string()) {
      turn.motion_label = doc["motion_label"].get<std::string>();
    }
    if (doc.contains("motion_id") && doc["motion_id"].is_string()) turn.motion_id = doc["motion_id"].get<std::string>();
    return turn;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, std::string("bad transcript turn: ") + e.what());
  }
}

void write_transcript_jsonl(std::ostream& out, const Transcript& transcript) {
  for (const auto& turn : transcript) out << turn_to_json(turn).dump() << '\n';
}

std::string transcript_to_jsonl(const Transcript& transcript) {
  std::ostringstream out;
  write_transcript_jsonl(out, transcript);
  return out.str();
}

Transcript read_transcript(std::string_view text) {
  Transcript transcript;
  int line_no = 0;
  for (const auto raw : detail::split_lines(text)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty()) continue;
    ChatTurn turn;
    if (line.front() == '{') {
      try {
        turn = turn_from_json(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::malformed, "line " + std::to_string(line_no) + ": " + e.what());
      }
    } else {
      const auto colon = line.find(':');
      const bool has_speaker = colon != std::string_view::npos && colon > 0 && colon <= 40 &&
                               line.substr(0, colon).find(' ') == std::string_view::npos;
      turn.speaker = has_speaker ? std::string(line.substr(0, colon)) : std::string();
      turn.text = std::string(detail::trim(has_speaker ? line.substr(colon + 1) : line));
    }
    turn.index = static_cast<int>(transcript.size());
    transcript.push_back(std::move(turn));
  }
  return transcript;
}

Transcript load_transcript(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::storage_io, "cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return read_transcript(buffer.str());
}

}  // namespace alterforge
