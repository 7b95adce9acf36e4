#include "trackmate/llm/prompt.hpp"

namespace trackmate::llm {

namespace {

std::string rubric_lines() {
  std::string out;
  for (std::size_t i = 0; i < kRubricNames.size(); ++i) {
    out += "- ";
    out += kRubricNames[i];
    out += " (key \"";
    out += kRubricKeys[i];
    out += "\")\n";
  }
  return out;
}

}  // namespace

PromptTemplate PromptTemplate::standard() {
  PromptTemplate t;
  t.primary_function =
      "I am a senior music producer reviewing a track for an independent artist who works alone. "
      "I read the analysis report carefully before I form an opinion, and I judge the track by what the data "
      "and my experience tell me, not by what the artist hopes to hear. "
      "I treat every number in the report as evidence and I say so when the evidence is thin.\n"
      "Base every statement on the report. Never invent measurements that the report does not contain.";
  t.scoring_process =
      "I score the track on five categories, each as an integer from 1 to 10:\n" + rubric_lines() +
      "Give each score a one or two sentence justification that cites the report.\n"
      "Avoid excessive praise. A 10 is exceptional and rare; an average home production sits around 5.\n"
      "Name at least one concrete weakness for every category scored below 8.\n"
      "When asked for scores, reply with a fenced ```json block holding one object keyed by the category keys, "
      "where each value is {\"score\": <integer>, \"justification\": \"<text>\"}.";
  t.improvement_instructions =
      "I work through the track factor by factor: rhythm, harmony, timbre, structure and then the overall "
      "emotional direction. For each factor I connect what I observe to its effect on the listener before I "
      "suggest a change.\n"
      "Make every suggestion actionable in a home studio and tie it to a specific section or time range.\n"
      "Point out what already works so the artist knows what to keep.\n"
      "End every reply with one question tailored to this track that helps the artist decide the next step.";
  t.persona_block =
      "Tone: talk like a friendly producer in the studio with the artist. Keep it warm and casual, use plain "
      "words over jargon, and keep the energy up while staying honest.";
  return t;
}

std::string report_framing(const MusicReport& report) {
  std::string out =
      "You uploaded the track described below. The report summarises your track's rhythm, harmony, timbre, "
      "structure and semantics";
  out += ", at detail level " + std::to_string(report.at("depth").get<int>()) + " of 3.";
  return out;
}

std::string build_system_prompt(const MusicReport& report, const PromptTemplate& prompt) {
  std::string out;
  out += "# Primary function\n";
  out += prompt.primary_function;
  out += "\n\n# Track scoring process\n";
  out += prompt.scoring_process;
  out += "\n\n# Track improvement suggestions\n";
  out += prompt.improvement_instructions;
  if (prompt.producer_tone && !prompt.persona_block.empty()) {
    out += "\n\n";
    out += prompt.persona_block;
  }
  out += "\n\n# Your track\n";
  out += report_framing(report);
  out += "\n\n";
  out += render_report(report);
  return out;
}

}  // namespace trackmate::llm
