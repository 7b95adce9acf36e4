#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "trackmate/llm/backend.hpp"
#include "trackmate/report.hpp"

namespace trackmate::llm {

inline constexpr double kInterpretTemperature = 0.2;
inline constexpr double kEvaluatorTemperature = 0.2;

struct RefinementResult {
  MusicReport report;  // report at the selected depth
  int depth = 3;
  std::string interpretation;
  bool defaulted = false;  // evaluator named no depth
  std::array<std::string, 3> interpretations;
};

std::string interpretation_request(const MusicReport& report);
std::string evaluator_request(const std::array<std::string, 3>& interpretations);

/// First "DEPTH: n" token with n in 1..3.
std::optional<int> parse_depth_choice(std::string_view reply);

/// One interpretation call per depth, then one evaluator call. Exactly 4 calls.
RefinementResult refine_report(const AnalysisBundle& bundle, ChatBackend& backend);

}  // namespace trackmate::llm
