#pragma once

#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "trackmate/audio.hpp"
#include "trackmate/harmony.hpp"
#include "trackmate/rhythm.hpp"
#include "trackmate/spectral.hpp"

namespace trackmate {

class StructureTooShort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SectionFunction { kIntro, kVerse, kChorus, kBridge, kOutro, kOther };
std::string_view to_string(SectionFunction f);

enum class Emotion { kHappy, kTense, kSad, kCalm };
std::string_view to_string(Emotion e);

struct EmotionTag {
  Emotion label = Emotion::kCalm;
  double valence = 0.0;
  double arousal = 0.0;
};

/// Russell quadrant of a (valence, arousal) point; zero resolves toward positive.
Emotion emotion_quadrant(double valence, double arousal);

enum class Instrument { kDrums, kBass, kHarmonic };
std::string_view to_string(Instrument i);

struct InstrumentTag {
  Instrument name = Instrument::kHarmonic;
  double confidence = 0.0;
};

struct Section {
  double start = 0.0;
  double end = 0.0;
  char cluster = 'A';
  SectionFunction function = SectionFunction::kOther;
  EmotionTag emotion;
  std::vector<InstrumentTag> instruments;
  double energy = 0.0;  // mean RMS of the section audio

  double duration() const { return end - start; }
};

struct StructureConfig {
  int kernel_beats = 32;
  int min_section_beats = 4;
  int max_clusters = 5;
  int smoothing_beats = 4;       // moving average over beat features before comparison
  double novelty_threshold = 0.1;
  double timbre_bandwidth = 15.0; // MFCC distance scale for the similarity kernel
  double merge_distance = 0.3;   // average-linkage distance below which sections share a letter
};

/// Beat-synchronous feature rows: median chroma (12) followed by median MFCC.
FrameMatrix beat_sync_features(const Chromagram& chroma, const MfccMatrix& mfcc, const BeatGrid& beats,
                               double duration_s);

/// Self-similarity of beat features: mean of chroma cosine and a Gaussian
/// kernel over MFCC distance. Values in [-1, 1].
FrameMatrix self_similarity(const FrameMatrix& features, const StructureConfig& config = {});
FrameMatrix self_similarity_serial(const FrameMatrix& features, const StructureConfig& config = {});

/// Checkerboard-kernel novelty along the diagonal; one value per beat.
std::vector<double> novelty_curve(const FrameMatrix& ssm, int kernel_beats);

/// Boundaries and cluster letters; function/emotion/instruments are left default.
/// Throws StructureTooShort for fewer than 8 beats.
std::vector<Section> segment_structure(const Chromagram& chroma, const MfccMatrix& mfcc, const BeatGrid& beats,
                                       double duration_s, const StructureConfig& config = {});

/// Assigns intro/verse/chorus/bridge/outro/other from repetition and energy.
std::vector<Section> label_functions(std::vector<Section> sections, const std::vector<double>& energies);

struct EmotionInput {
  std::optional<double> tempo_bpm;
  std::optional<Mode> mode;
  double energy = 0.0;       // RMS
  double brightness = 50.0;  // timbre score 0-100
};

EmotionTag classify_emotion(const EmotionInput& input);

struct InstrumentRatios {
  double percussive = 0.0;
  double harmonic = 0.0;
  double harmonic_bass = 0.0;
};

/// Median-filter harmonic/percussive split of a magnitude spectrogram.
struct HpssMasks {
  FrameMatrix harmonic;
  FrameMatrix percussive;
};
HpssMasks hpss(const Spectrogram& spec, int kernel = 17);
HpssMasks hpss_serial(const Spectrogram& spec, int kernel = 17);

InstrumentRatios instrument_ratios(const AudioClip& slice);

/// Coarse instrument tags for a mono slice of at least one second.
std::vector<InstrumentTag> detect_instruments(const AudioClip& slice);

}  // namespace trackmate
