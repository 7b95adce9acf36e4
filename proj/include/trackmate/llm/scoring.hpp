#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "trackmate/llm/backend.hpp"
#include "trackmate/llm/prompt.hpp"

namespace trackmate::llm {

class ScoreParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CategoryScore {
  int score = 1;
  std::string justification;
  bool clamped = false;  // the model's value was outside 1-10
};

struct RubricScores {
  std::array<CategoryScore, 5> categories;  // kRubricKeys order
  int retries = 0;

  bool any_clamped() const;
  const CategoryScore& at(std::string_view key) const;
  nlohmann::ordered_json to_json() const;
  static RubricScores from_json(const nlohmann::ordered_json& doc);
};

inline constexpr double kScoringTemperature = 0.2;

/// Text between the first ``` fence (optionally tagged json) and its closing fence.
std::optional<std::string> extract_fenced_block(std::string_view reply);

/// Parses a model reply; throws ScoreParseError when no valid block is present.
RubricScores parse_scores(std::string_view reply);

/// User message that asks for the scores block.
std::string scoring_request();
std::string scoring_correction();

/// System prompt + scoring request, one retry with a correction message.
RubricScores score_track(const MusicReport& report, ChatBackend& backend,
                         const PromptTemplate& prompt = PromptTemplate::standard());
RubricScores score_with_prompt(std::string system_prompt, ChatBackend& backend);

}  // namespace trackmate::llm
