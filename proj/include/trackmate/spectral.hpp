#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "trackmate/audio.hpp"

namespace trackmate {

/// Dense row-major matrix of doubles; rows are analysis frames.
class FrameMatrix {
 public:
  FrameMatrix() = default;
  FrameMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  friend bool operator==(const FrameMatrix&, const FrameMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Magnitude STFT. Frame i starts at sample i * hop.
struct Spectrogram {
  FrameMatrix magnitudes;  // frames x (window_size / 2 + 1)
  double frame_hop_s = 0.0;
  double bin_hz = 0.0;
  int window_size = 0;
  int hop = 0;
  int sample_rate = 0;

  std::size_t frames() const { return magnitudes.rows(); }
  std::size_t bins() const { return magnitudes.cols(); }
  double frame_time(std::size_t i) const { return static_cast<double>(i) * frame_hop_s; }
  double duration_s() const;  // length of the source clip
  std::size_t source_length = 0;
};

struct MfccMatrix {
  FrameMatrix coefficients;  // frames x n_mfcc
  double frame_hop_s = 0.0;
};

/// Number of frames produced for a signal of `length` samples.
std::size_t stft_frame_count(std::size_t length, int window_size, int hop);

/// Hann-windowed magnitude STFT of a mono clip (frames computed in parallel).
Spectrogram stft(const AudioClip& clip, int window_size = kWindowSize, int hop = kHopSize);
/// Single-threaded reference; produces bit-identical output to stft().
Spectrogram stft_serial(const AudioClip& clip, int window_size = kWindowSize, int hop = kHopSize);

/// Triangular mel filterbank (HTK mel scale) over [0, Nyquist]; rows are filters.
FrameMatrix mel_filterbank(int n_mels, std::size_t n_bins, double bin_hz, double sample_rate);

/// Floor applied to mel energies before the logarithm.
inline constexpr double kLogFloor = 1e-10;

/// Per-frame orthonormal DCT-II of log mel energies.
MfccMatrix mfcc(const Spectrogram& spec, int n_mels = 40, int n_mfcc = 13);

}  // namespace trackmate
