#include "trackmate/llm/refine.hpp"

#include <regex>
#include <vector>

namespace trackmate::llm {

namespace {

const char* kInterpreterRole =
    "You are a music producer reading an automatic analysis report of a track. "
    "Explain what the data says about the track in plain language a musician can act on.";

const char* kEvaluatorRole =
    "You are an evaluator comparing interpretations of the same track written from reports of increasing detail.";

}  // namespace

std::string interpretation_request(const MusicReport& report) {
  return "Interpret this report at detail level " + std::to_string(report.at("depth").get<int>()) +
         " of 3. Describe the chord usage, rhythm and emotional arc, and name anything the data leaves unclear.\n\n" +
         render_report(report);
}

std::string evaluator_request(const std::array<std::string, 3>& interpretations) {
  std::string out =
      "Compare the three interpretations below and pick the most insightful one, judged on clarity, accuracy "
      "and relevance to a musician.";
  for (std::size_t i = 0; i < interpretations.size(); ++i) {
    out += "\n\n## Interpretation at DEPTH " + std::to_string(i + 1) + "\n" + interpretations[i];
  }
  out += "\n\nAnswer with a line of the form DEPTH: <1, 2 or 3> followed by one sentence of reasoning.";
  return out;
}

std::optional<int> parse_depth_choice(std::string_view reply) {
  static const std::regex pattern(R"(DEPTH:\s*([123])\b)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(reply.begin(), reply.end(), m, pattern)) return std::nullopt;
  return m[1].str()[0] - '0';
}

RefinementResult refine_report(const AnalysisBundle& bundle, ChatBackend& backend) {
  RefinementResult out;
  std::array<MusicReport, 3> reports;
  for (int d = 1; d <= 3; ++d) {
    reports[d - 1] = build_report(bundle, d);
    const std::vector<Message> messages = {{Role::kSystem, kInterpreterRole},
                                           {Role::kUser, interpretation_request(reports[d - 1])}};
    out.interpretations[d - 1] = backend.send(messages, kInterpretTemperature);
  }
  const std::vector<Message> eval = {{Role::kSystem, kEvaluatorRole},
                                     {Role::kUser, evaluator_request(out.interpretations)}};
  const auto choice = parse_depth_choice(backend.send(eval, kEvaluatorTemperature));
  out.defaulted = !choice.has_value();
  out.depth = choice.value_or(3);
  out.report = std::move(reports[out.depth - 1]);
  out.interpretation = out.interpretations[out.depth - 1];
  return out;
}

}  // namespace trackmate::llm
