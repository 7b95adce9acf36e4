#pragma once

#include <array>
#include <string>
#include <string_view>

#include "trackmate/report.hpp"

namespace trackmate::llm {

/// Rubric categories: JSON keys and display names, in rubric order.
inline constexpr std::array<std::string_view, 5> kRubricKeys = {
    "creativity_and_originality", "genre_fidelity", "conveyability", "musical_richness", "track_memorability"};
inline constexpr std::array<std::string_view, 5> kRubricNames = {
    "Creativity and Originality", "Genre Fidelity", "Conveyability", "Musical Richness", "Track Memorability"};

/// Three-part system prompt. The evaluation stance is written in the first
/// person, binding rules as imperatives and the report framing in the second
/// person.
struct PromptTemplate {
  std::string primary_function;
  std::string scoring_process;
  std::string improvement_instructions;
  std::string persona_block;  // appended to the improvement part when producer_tone is on
  bool producer_tone = true;

  static PromptTemplate standard();
};

/// Second-person framing placed before the rendered report.
std::string report_framing(const MusicReport& report);

std::string build_system_prompt(const MusicReport& report, const PromptTemplate& prompt);

}  // namespace trackmate::llm
