#include "trackmate/llm/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace trackmate::llm {

bool RubricScores::any_clamped() const {
  return std::any_of(categories.begin(), categories.end(), [](const CategoryScore& c) { return c.clamped; });
}

const CategoryScore& RubricScores::at(std::string_view key) const {
  for (std::size_t i = 0; i < kRubricKeys.size(); ++i)
    if (kRubricKeys[i] == key) return categories[i];
  throw std::out_of_range("unknown rubric category: " + std::string(key));
}

nlohmann::ordered_json RubricScores::to_json() const {
  nlohmann::ordered_json out;
  for (std::size_t i = 0; i < kRubricKeys.size(); ++i) {
    const auto& c = categories[i];
    out[std::string(kRubricKeys[i])] = {{"name", std::string(kRubricNames[i])},
                                        {"score", c.score},
                                        {"justification", c.justification},
                                        {"clamped", c.clamped}};
  }
  return out;
}

RubricScores RubricScores::from_json(const nlohmann::ordered_json& doc) {
  RubricScores out;
  for (std::size_t i = 0; i < kRubricKeys.size(); ++i) {
    const auto& c = doc.at(std::string(kRubricKeys[i]));
    out.categories[i] = {c.at("score").get<int>(), c.value("justification", ""), c.value("clamped", false)};
  }
  return out;
}

std::optional<std::string> extract_fenced_block(std::string_view reply) {
  const auto open = reply.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  auto body_start = reply.find('\n', open);
  if (body_start == std::string_view::npos) return std::nullopt;
  ++body_start;
  const auto close = reply.find("```", body_start);
  if (close == std::string_view::npos) return std::nullopt;
  return std::string(reply.substr(body_start, close - body_start));
}

RubricScores parse_scores(std::string_view reply) {
  const auto block = extract_fenced_block(reply);
  if (!block) throw ScoreParseError("reply has no fenced scores block");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(*block);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScoreParseError(std::string("scores block is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ScoreParseError("scores block must be a JSON object");

  RubricScores out;
  for (std::size_t i = 0; i < kRubricKeys.size(); ++i) {
    const std::string key(kRubricKeys[i]);
    if (!doc.contains(key)) throw ScoreParseError("scores block lacks category " + key);
    const auto& entry = doc[key];
    const nlohmann::json* value = &entry;
    std::string justification;
    if (entry.is_object()) {
      if (!entry.contains("score")) throw ScoreParseError("category " + key + " has no score");
      value = &entry["score"];
      if (entry.contains("justification") && entry["justification"].is_string()) {
        justification = entry["justification"].get<std::string>();
      }
    }
    if (!value->is_number()) throw ScoreParseError("score for " + key + " is not a number");
    const double raw = value->get<double>();
    if (!std::isfinite(raw) || raw != std::floor(raw)) throw ScoreParseError("score for " + key + " is not an integer");
    const auto as_int = static_cast<long long>(raw);
    auto& c = out.categories[i];
    c.score = static_cast<int>(std::clamp<long long>(as_int, 1, 10));
    c.clamped = c.score != as_int;
    c.justification = std::move(justification);
  }
  return out;
}

std::string scoring_request() {
  return "Score my track now. Reply with a fenced ```json block holding one object with the keys "
         "creativity_and_originality, genre_fidelity, conveyability, musical_richness and track_memorability. "
         "Each value must be {\"score\": <integer 1-10>, \"justification\": \"<text>\"}.";
}

std::string scoring_correction() {
  return "Your previous reply did not contain a valid scores block. Reply again with only the fenced ```json "
         "block described above, with an integer score from 1 to 10 for all five categories.";
}

RubricScores score_track(const MusicReport& report, ChatBackend& backend, const PromptTemplate& prompt) {
  return score_with_prompt(build_system_prompt(report, prompt), backend);
}

RubricScores score_with_prompt(std::string system_prompt, ChatBackend& backend) {
  std::vector<Message> messages = {{Role::kSystem, std::move(system_prompt)}, {Role::kUser, scoring_request()}};
  const std::string first = backend.send(messages, kScoringTemperature);
  try {
    return parse_scores(first);
  } catch (const ScoreParseError&) {
  }
  messages.push_back({Role::kAssistant, first});
  messages.push_back({Role::kUser, scoring_correction()});
  const std::string second = backend.send(messages, kScoringTemperature);
  auto scores = parse_scores(second);  // a second failure propagates
  scores.retries = 1;
  return scores;
}

}  // namespace trackmate::llm
