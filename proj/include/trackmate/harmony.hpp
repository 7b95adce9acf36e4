#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "trackmate/spectral.hpp"

namespace trackmate {

class AmbiguousKey : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pitch-class energies per frame; column 0 is C. Non-silent frames are
/// L2-normalized, silent frames stay all-zero.
struct Chromagram {
  FrameMatrix energies;  // frames x 12
  double frame_hop_s = 0.0;
  double window_s = 0.0;  // analysis window length; frame i is centred at i*hop + window/2

  std::size_t frames() const { return energies.rows(); }
  double frame_center(std::size_t i) const { return static_cast<double>(i) * frame_hop_s + window_s / 2.0; }
  bool silent(std::size_t i) const;
};

enum class Mode { kMajor, kMinor };

struct KeyEstimate {
  int tonic = 0;  // pitch class, C = 0
  Mode mode = Mode::kMajor;
  double correlation = 0.0;

  std::string name() const;  // e.g. "A minor"
};

/// Chord symbol: 24 major/minor triads plus no-chord.
class ChordLabel {
 public:
  static constexpr int kNoChord = 24;

  constexpr ChordLabel() = default;
  static ChordLabel triad(int root, Mode quality) {
    ChordLabel l;
    l.index_ = (root % 12 + 12) % 12 + (quality == Mode::kMinor ? 12 : 0);
    return l;
  }
  static ChordLabel none() { return ChordLabel(); }
  static ChordLabel from_index(int index);
  /// Parses "<ROOT>:<maj|min>" or "N"; throws std::invalid_argument otherwise.
  static ChordLabel parse(std::string_view text);

  int index() const { return index_; }
  bool is_none() const { return index_ == kNoChord; }
  int root() const { return index_ % 12; }
  Mode quality() const { return index_ >= 12 ? Mode::kMinor : Mode::kMajor; }
  std::string str() const;
  ChordLabel transposed(int semitones) const;

  friend bool operator==(ChordLabel, ChordLabel) = default;

 private:
  int index_ = kNoChord;
};

struct ChordSegment {
  double start = 0.0;
  double end = 0.0;
  ChordLabel label;
};

struct ChordConfig {
  double self_transition = 0.9;
  double no_chord_weight = 0.4;
  double min_duration_s = 0.25;
};

struct ChromaConfig {
  double min_hz = 55.0;
  double max_hz = 1760.0;
  double silence_gate = 1e-3;  // frames below this fraction of the loudest frame's energy are silent
};

const std::array<const char*, 12>& pitch_class_names();

Chromagram chromagram(const Spectrogram& spec, const ChromaConfig& config = {});

/// Krumhansl-Kessler key profiles, C-rooted.
const std::array<double, 12>& major_key_profile();
const std::array<double, 12>& minor_key_profile();

/// Throws AmbiguousKey when the averaged chroma has no variance.
KeyEstimate classify_key(const Chromagram& chroma);

/// Emission scores per frame: 24 triad cosine similarities plus the no-chord score.
FrameMatrix chord_emissions(const Chromagram& chroma, const ChordConfig& config = {});
FrameMatrix chord_emissions_serial(const Chromagram& chroma, const ChordConfig& config = {});

std::vector<ChordSegment> recognize_chords(const Chromagram& chroma, double duration_s, const ChordConfig& config = {});

/// Rotates every frame by `semitones` pitch classes (C -> C# for +1).
Chromagram rotate_chroma(const Chromagram& chroma, int semitones);

}  // namespace trackmate
