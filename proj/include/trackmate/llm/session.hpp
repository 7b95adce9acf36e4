#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "trackmate/llm/backend.hpp"
#include "trackmate/llm/got.hpp"
#include "trackmate/llm/prompt.hpp"
#include "trackmate/llm/scoring.hpp"

namespace trackmate::llm {

inline constexpr double kChatTemperature = 0.7;

struct ChatSession {
  std::string id;
  MusicReport report;
  std::string system_prompt;
  std::vector<Message> history;  // system, report turn, then user/assistant pairs
  std::optional<RubricScores> scores;

  nlohmann::ordered_json to_json() const;
  static ChatSession from_json(const nlohmann::ordered_json& doc);
};

/// User turn that hands the report to the model right after the system prompt.
std::string report_user_turn(const MusicReport& report);

/// The request recorded as the user side of the opening exchange.
std::string opening_request();

/// Random 128-bit hex token.
std::string new_session_id();

ChatSession start_session(std::string id, MusicReport report, const PromptTemplate& prompt = PromptTemplate::standard());

/// Appends the user message and the reply. History is untouched on failure.
std::string chat_turn(ChatSession& session, std::string_view user_message, ChatBackend& backend);

/// Appends a tailored closing question when the text does not already end with one.
std::string ensure_closing_question(std::string text, const MusicReport& report);

/// Scores, a GoT pass over the system prompt and the opening exchange. On error the
/// session is left as it was.
std::string open_session(ChatSession& session, ThoughtGraph graph, ChatBackend& backend);

/// Score card plus suggestions, as shown to the user.
std::string opening_message(const RubricScores& scores, std::string_view suggestions, const MusicReport& report);

}  // namespace trackmate::llm
