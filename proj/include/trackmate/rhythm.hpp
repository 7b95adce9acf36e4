#pragma once

#include <stdexcept>
#include <vector>

#include "trackmate/spectral.hpp"

namespace trackmate {

struct Chromagram;

class NoRhythmicContent : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Half-wave rectified log-magnitude spectral flux, one value per STFT frame.
/// Frame i describes the samples that entered the window since frame i - 1,
/// so its timestamp is time_offset_s + i * frame_hop_s.
struct OnsetEnvelope {
  std::vector<double> strengths;
  double frame_hop_s = 0.0;
  double time_offset_s = 0.0;
  double duration_s = 0.0;

  std::size_t size() const { return strengths.size(); }
  double time(std::size_t i) const { return time_offset_s + static_cast<double>(i) * frame_hop_s; }
  /// Nearest frame index for a timestamp, clamped to the envelope.
  std::size_t frame_at(double t) const;
};

struct OnsetList {
  std::vector<double> times_s;
};

struct TempoEstimate {
  double bpm = 0.0;
  double confidence = 0.0;
};

struct BeatGrid {
  std::vector<double> beat_times_s;
  std::vector<bool> downbeat_flags;
  int meter = 4;

  std::size_t size() const { return beat_times_s.size(); }
  std::size_t downbeat_count() const;
};

struct RhythmConfig {
  double log_compression = 100.0;     // gamma in log(1 + gamma * |X| / max|X|)
  double median_window_s = 0.4;       // adaptive threshold window
  double threshold_delta = 0.1;       // times the 95th percentile of the envelope
  double refractory_s = 0.05;
  double min_bpm = 60.0;
  double max_bpm = 200.0;             // exclusive
  double prior_center_bpm = 110.0;
  double prior_sigma_octaves = 0.4;
  double min_confidence = 0.1;
  double min_flux_peak = 1e-3;        // below this the envelope is numerical noise
  double subpulse_ratio = 0.8;        // a sub-period this strong replaces the candidate
  double tightness = 100.0;           // lambda in the beat-tracking objective
};

OnsetEnvelope onset_strength(const Spectrogram& spec, const RhythmConfig& config = {});
OnsetList detect_onsets(const OnsetEnvelope& env, const RhythmConfig& config = {});

/// Folds a tempo into [min_bpm, max_bpm) by octaves.
double fold_tempo(double bpm, double min_bpm = 60.0, double max_bpm = 200.0);
/// Log-normal tempo prior weight in (0, 1].
double tempo_prior(double bpm, const RhythmConfig& config = {});

/// Throws NoRhythmicContent when the autocorrelation confidence is below threshold.
TempoEstimate estimate_tempo(const OnsetEnvelope& env, const RhythmConfig& config = {});

/// Dynamic-programming beat tracker. Downbeat flags are left unset; use
/// estimate_downbeats to fill them.
BeatGrid track_beats(const OnsetEnvelope& env, const TempoEstimate& tempo, const RhythmConfig& config = {});

/// 4/4 phase selection from onset strength and chroma change at bar starts.
BeatGrid estimate_downbeats(const BeatGrid& grid, const OnsetEnvelope& env, const Chromagram& chroma);

/// Per-phase downbeat score used by estimate_downbeats (exposed for tests).
std::vector<double> downbeat_phase_scores(const BeatGrid& grid, const OnsetEnvelope& env, const Chromagram& chroma);

}  // namespace trackmate
