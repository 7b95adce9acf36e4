#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "trackmate/audio.hpp"
#include "trackmate/harmony.hpp"
#include "trackmate/rhythm.hpp"
#include "trackmate/semantics.hpp"
#include "trackmate/structure.hpp"
#include "trackmate/timbre.hpp"

namespace trackmate {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kReportSchemaVersion = "1";

/// Everything the analyzers produced for one track. Analyzers that could not
/// produce a value leave it empty and record why.
struct AnalysisBundle {
  double duration_s = 0.0;
  int sample_rate = 0;      // of the decoded source, before resampling
  std::string source_hash;  // hex SHA-256 of the source bytes, if known

  std::optional<TempoEstimate> tempo;
  std::string rhythm_absent_reason;
  BeatGrid beats;
  OnsetList onsets;

  std::optional<KeyEstimate> key;
  std::string key_absent_reason;
  std::vector<ChordSegment> chords;

  std::vector<Section> sections;
  TimbralProfile timbre;
  TrackSemantics semantics;
};

struct AnalyzeOptions {
  std::string source_hash;
  SemanticsPlugin* plugin = nullptr;
  RhythmConfig rhythm;
  ChordConfig chords;
  StructureConfig structure;
  TimbreConfig timbre;
};

/// Full pipeline. Throws AnalysisError for clips shorter than one second;
/// every other analyzer failure is recorded in the bundle.
AnalysisBundle analyze_track(const AudioClip& clip, const AnalyzeOptions& options = {});

struct Progression {
  std::vector<ChordLabel> chords;  // two or three labels
  int count = 0;
};

struct ChordStats {
  int total_changes = 0;
  ChordLabel dominant_chord;
  int major_count = 0;
  int minor_count = 0;
  double avg_duration_s = 0.0;
  std::vector<Progression> top_progressions;  // at most 5
};

ChordStats chord_statistics(std::span<const ChordSegment> chords);

/// Coefficient of variation of inter-beat intervals; 0 with fewer than 3 beats.
double tempo_stability_cv(const BeatGrid& beats);

using MusicReport = nlohmann::ordered_json;

/// Depth-leveled report document: 1 = raw data, 2 = counts, 3 = nuanced statistics.
MusicReport build_report(const AnalysisBundle& bundle, int depth);

/// Fixed-layout plain text with one header per aspect.
std::string render_report(const MusicReport& report);

}  // namespace trackmate
