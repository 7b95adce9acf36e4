#pragma once

#include <chrono>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "trackmate/harmony.hpp"
#include "trackmate/structure.hpp"
#include "trackmate/timbre.hpp"

namespace trackmate {

class PluginError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kGenres[] = {"pop",  "rock", "hip-hop",   "electronic",
                                               "jazz", "folk", "classical", "other"};
inline constexpr std::string_view kThemes[] = {"love", "party", "melancholy", "energy", "chill", "other"};

bool is_genre(std::string_view label);
bool is_theme(std::string_view label);

enum class SemanticsSource { kHeuristic, kPlugin };

struct TrackSemantics {
  std::string genre = "other";
  std::string theme = "other";
  SemanticsSource source = SemanticsSource::kHeuristic;
  std::optional<std::string> warning;  // set when a plugin failed and the heuristic was used
};

/// Track-level features handed to the heuristic and to external classifiers.
struct SemanticsFeatures {
  std::optional<double> tempo_bpm;
  std::optional<KeyEstimate> key;
  std::vector<Section> sections;
  TimbralProfile timbre;
};

/// Plugin exchange document (UTF-8 JSON on the plugin's standard input).
nlohmann::json plugin_request(const SemanticsFeatures& features);

/// External genre/theme classifier.
class SemanticsPlugin {
 public:
  virtual ~SemanticsPlugin() = default;
  /// Returns the plugin's reply document; throws PluginError on transport failure.
  virtual nlohmann::json classify(const nlohmann::json& request) = 0;
};

/// Runs a shell command, writes the request to its stdin and parses one JSON
/// document from its stdout. Non-zero exit or timeout raise PluginError.
class SubprocessPlugin : public SemanticsPlugin {
 public:
  explicit SubprocessPlugin(std::string command, std::chrono::milliseconds timeout = std::chrono::seconds(10));
  nlohmann::json classify(const nlohmann::json& request) override;

 private:
  std::string command_;
  std::chrono::milliseconds timeout_;
};

struct ProcessResult {
  int exit_code = -1;
  bool timed_out = false;
  std::string out;
};

/// `/bin/sh -c command` with the given stdin, bounded by `timeout`.
ProcessResult run_process(const std::string& command, std::string_view input, std::chrono::milliseconds timeout);

/// Fraction of track duration during which each instrument is tagged.
double instrument_coverage(std::span<const Section> sections, Instrument instrument);

TrackSemantics heuristic_semantics(const SemanticsFeatures& features);

/// Uses the plugin when given; malformed replies fall back to the heuristic
/// with a warning.
TrackSemantics classify_track_semantics(const SemanticsFeatures& features, SemanticsPlugin* plugin = nullptr);

}  // namespace trackmate
