#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "trackmate/audio.hpp"
#include "trackmate/harmony.hpp"

namespace trackmate::testing {

inline constexpr int kRate = kAnalysisRate;

double midi_hz(double midi);

std::vector<double> sine(double hz, double seconds, int rate = kRate, double amp = 0.5);

/// Short decaying noise bursts at k * 60 / bpm, starting at `offset_s`.
struct ClickTrack {
  AudioClip clip;
  std::vector<double> beat_times;
};
ClickTrack click_track(double bpm, double seconds, double offset_s = 0.0, int rate = kRate);

/// Root-position triad of sines with the root in octave 4.
std::vector<double> triad(ChordLabel chord, double seconds, int rate = kRate, double amp = 0.2);

/// Concatenated triads, `seconds_each` per chord.
AudioClip chord_sequence(const std::vector<ChordLabel>& chords, double seconds_each, int rate = kRate);

/// I-IV-V-I in a major key, i-iv-V-i in a minor key.
AudioClip cadence(int tonic, Mode mode, double seconds_each = 2.0, int rate = kRate);

std::vector<double> white_noise(std::mt19937& rng, double seconds, int rate = kRate, double amp = 0.3);

/// Second-order Butterworth sections applied `order / 2` times.
std::vector<double> lowpass(const std::vector<double>& x, double cutoff_hz, int rate = kRate, int order = 4);
std::vector<double> highpass(const std::vector<double>& x, double cutoff_hz, int rate = kRate, int order = 4);

/// Sum of equal-length (or shorter) layers.
void mix_into(std::vector<double>& dst, const std::vector<double>& src, double gain = 1.0, std::size_t offset = 0);

struct DrumPattern {
  bool kick = true;
  bool snare = true;
  bool hats = true;
};

/// Drum-kit layer (kick on 1 and 3, snare on 2 and 4, eighth-note hats).
std::vector<double> drums(std::mt19937& rng, double bpm, double seconds, DrumPattern pattern = {}, int rate = kRate);

/// Bass line following the chord roots.
std::vector<double> bass_line(const std::vector<ChordLabel>& chords, double seconds_each, double total_seconds,
                              int rate = kRate);

/// Drums, bass and a triad pad at 120 BPM cycling C - G - A:min - F.
AudioClip pop_mix(std::uint32_t seed, double seconds = 30.0, int rate = kRate);

/// Two contrasting halves joined at `change_s`.
struct TwoPartTrack {
  AudioClip clip;
  double change_s = 0.0;
};
TwoPartTrack two_part_track(std::uint32_t seed, double seconds = 40.0);

/// Three parts A - B - A' where both A parts share material.
AudioClip aba_track(std::uint32_t seed, double part_seconds = 16.0);

}  // namespace trackmate::testing
