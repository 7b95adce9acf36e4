#include "trackmate/llm/session.hpp"

#include <fmt/format.h>

#include <random>

namespace trackmate::llm {

nlohmann::ordered_json ChatSession::to_json() const {
  nlohmann::ordered_json out;
  out["id"] = id;
  out["report"] = report;
  out["system_prompt"] = system_prompt;
  auto hist = nlohmann::ordered_json::array();
  for (const auto& m : history) hist.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  out["history"] = std::move(hist);
  out["scores"] = scores ? scores->to_json() : nlohmann::ordered_json(nullptr);
  return out;
}

ChatSession ChatSession::from_json(const nlohmann::ordered_json& doc) {
  ChatSession s;
  s.id = doc.at("id").get<std::string>();
  s.report = doc.at("report");
  s.system_prompt = doc.at("system_prompt").get<std::string>();
  for (const auto& m : doc.at("history")) {
    s.history.push_back({role_from_string(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
  }
  if (doc.contains("scores") && !doc["scores"].is_null()) s.scores = RubricScores::from_json(doc["scores"]);
  return s;
}

std::string report_user_turn(const MusicReport& report) {
  return "I just uploaded my track. Its analysis report (detail level " + std::to_string(report.at("depth").get<int>()) +
         " of 3) is in your instructions above. Use it for everything that follows.";
}

std::string opening_request() { return "Please score my track and suggest how to improve it."; }

std::string new_session_id() {
  std::random_device rd;
  std::uniform_int_distribution<unsigned> byte(0, 255);
  std::string out;
  for (int i = 0; i < 16; ++i) out += fmt::format("{:02x}", byte(rd));
  return out;
}

ChatSession start_session(std::string id, MusicReport report, const PromptTemplate& prompt) {
  ChatSession s;
  s.id = std::move(id);
  s.system_prompt = build_system_prompt(report, prompt);
  s.history = {{Role::kSystem, s.system_prompt}, {Role::kUser, report_user_turn(report)}};
  s.report = std::move(report);
  return s;
}

std::string chat_turn(ChatSession& session, std::string_view user_message, ChatBackend& backend) {
  std::vector<Message> messages = session.history;
  messages.push_back({Role::kUser, std::string(user_message)});
  std::string reply = backend.send(messages, kChatTemperature);
  messages.push_back({Role::kAssistant, reply});
  session.history = std::move(messages);
  return reply;
}

namespace {

bool ends_with_question(std::string_view text) {
  const auto last = text.find_last_not_of(" \t\r\n\"')*_");
  return last != std::string_view::npos && text[last] == '?';
}

}  // namespace

std::string ensure_closing_question(std::string text, const MusicReport& report) {
  if (ends_with_question(text)) return text;
  std::string groove = "the groove";
  if (report.contains("rhythm") && report["rhythm"].value("status", "") == "ok") {
    groove = fmt::format("the groove at {:.0f} BPM", report["rhythm"]["tempo_bpm"].get<double>());
  }
  std::string harmony = "the harmony";
  if (report.contains("harmony") && report["harmony"]["key"].is_object()) {
    const auto& key = report["harmony"]["key"];
    harmony = fmt::format("the harmony in {} {}", key["tonic"].get<std::string>(), key["mode"].get<std::string>());
  }
  while (!text.empty() && (text.back() == '\n' || text.back() == ' ')) text.pop_back();
  if (!text.empty()) text += "\n\n";
  text += "Which do you want to work on first: " + groove + " or " + harmony + "?";
  return text;
}

std::string opening_message(const RubricScores& scores, std::string_view suggestions, const MusicReport& report) {
  std::string out = "Scores:\n";
  for (std::size_t i = 0; i < kRubricKeys.size(); ++i) {
    const auto& c = scores.categories[i];
    out += fmt::format("- {}: {}/10", kRubricNames[i], c.score);
    if (!c.justification.empty()) out += " (" + c.justification + ")";
    out += "\n";
  }
  out += "\n";
  out += suggestions;
  return ensure_closing_question(std::move(out), report);
}

std::string open_session(ChatSession& session, ThoughtGraph graph, ChatBackend& backend) {
  // Scoring and the graph run on their own message lists; only the final
  // opening exchange lands in the history.
  auto scores = score_with_prompt(session.system_prompt, backend);
  execute_got(graph, session.system_prompt, backend);
  std::string opening = opening_message(scores, final_output(graph), session.report);
  session.history.push_back({Role::kUser, opening_request()});
  session.history.push_back({Role::kAssistant, opening});
  session.scores = std::move(scores);
  return opening;
}

}  // namespace trackmate::llm
