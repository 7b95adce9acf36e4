#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace trackmate {

/// Analysis front-end defaults shared by every analyzer.
inline constexpr int kAnalysisRate = 22050;
inline constexpr int kWindowSize = 2048;
inline constexpr int kHopSize = 512;

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decoded PCM audio. Samples are stored planar (one vector per channel),
/// normalized to [-1, 1]. Every channel has the same length.
class AudioClip {
 public:
  AudioClip() = default;
  AudioClip(std::vector<std::vector<double>> channels, int sample_rate);

  /// Convenience for single-channel clips.
  static AudioClip mono(std::vector<double> samples, int sample_rate);

  int sample_rate() const { return sample_rate_; }
  int channels() const { return static_cast<int>(channels_.size()); }
  std::size_t frame_count() const {
    return channels_.empty() ? 0 : channels_.front().size();
  }
  double duration_s() const {
    return sample_rate_ > 0 ? static_cast<double>(frame_count()) / sample_rate_ : 0.0;
  }

  std::span<const double> channel(int index) const { return channels_.at(index); }
  /// First channel; only meaningful for mono clips.
  std::span<const double> samples() const { return channel(0); }

  double peak() const;

  /// Samples [begin_s, end_s) of a mono clip, clamped to the clip.
  AudioClip slice(double begin_s, double end_s) const;

 private:
  std::vector<std::vector<double>> channels_;
  int sample_rate_ = 0;
};

/// Decodes a RIFF/WAVE file (PCM 16/24/32-bit or IEEE float 32-bit,
/// one or two channels). `hint` is an optional format tag such as "wav".
AudioClip decode_audio(std::span<const std::uint8_t> bytes,
                       std::optional<std::string_view> hint = std::nullopt);

AudioClip read_audio_file(const std::string& path);

enum class WavEncoding { kPcm16, kPcm24, kPcm32, kFloat32 };

/// Writes a canonical WAVE file. Used by the CLI fixtures and the tests.
std::vector<std::uint8_t> encode_wav(const AudioClip& clip,
                                     WavEncoding encoding = WavEncoding::kPcm16);

/// Arithmetic channel mean followed by windowed-sinc resampling.
AudioClip resample_mono(const AudioClip& clip, int target_rate);
AudioClip resample_mono_serial(const AudioClip& clip, int target_rate);

/// Root-mean-square of a sample block.
double rms(std::span<const double> samples);

}  // namespace trackmate
