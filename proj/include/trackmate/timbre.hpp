#pragma once

#include <array>
#include <string_view>

#include "trackmate/audio.hpp"
#include "trackmate/spectral.hpp"

namespace trackmate {

/// Seven 0-100 timbral scores computed from transparent spectral heuristics.
struct TimbralProfile {
  double brightness = 0.0;
  double warmth = 0.0;
  double depth = 0.0;
  double hardness = 0.0;
  double roughness = 0.0;
  double sharpness = 0.0;
  double boominess = 0.0;

  static constexpr std::array<std::string_view, 7> kNames = {
      "brightness", "warmth", "depth", "hardness", "roughness", "sharpness", "boominess"};
  std::array<double, 7> values() const {
    return {brightness, warmth, depth, hardness, roughness, sharpness, boominess};
  }
};

/// Unsquashed measurements, one per attribute (ratios or normalized slopes).
using RawTimbre = TimbralProfile;

/// Per-attribute half-saturation constants: score = 100 * x / (x + k).
/// Calibrated so the bundled synthetic pop reference mix scores about 50.
struct TimbreConfig {
  double brightness_k = 0.180;
  double warmth_k = 0.381;
  double depth_k = 0.719;
  double hardness_k = 6.24;
  double roughness_k = 0.348;
  double sharpness_k = 0.0167;
  double boominess_k = 0.459;
};

RawTimbre raw_timbre(const AudioClip& clip, const Spectrogram& spec);
TimbralProfile squash_timbre(const RawTimbre& raw, const TimbreConfig& config = {});
TimbralProfile timbral_descriptors(const AudioClip& clip, const Spectrogram& spec, const TimbreConfig& config = {});

}  // namespace trackmate
