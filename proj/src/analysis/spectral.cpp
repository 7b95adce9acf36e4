#include "trackmate/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "fft.hpp"

namespace trackmate {

double Spectrogram::duration_s() const {
  return sample_rate > 0 ? static_cast<double>(source_length) / sample_rate : 0.0;
}

std::size_t stft_frame_count(std::size_t length, int window_size, int hop) {
  const auto w = static_cast<std::size_t>(window_size);
  if (length < w) return 1;
  return 1 + (length - w) / static_cast<std::size_t>(hop);
}

namespace {

std::vector<double> hann(int n) {
  // Periodic Hann window.
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

Spectrogram make_empty(const AudioClip& clip, int window_size, int hop) {
  if (clip.channels() != 1) throw std::invalid_argument("stft expects a mono clip");
  if (hop < 1 || window_size < hop) throw std::invalid_argument("stft requires window_size >= hop >= 1");
  Spectrogram spec;
  spec.window_size = window_size;
  spec.hop = hop;
  spec.sample_rate = clip.sample_rate();
  spec.frame_hop_s = static_cast<double>(hop) / clip.sample_rate();
  spec.bin_hz = static_cast<double>(clip.sample_rate()) / window_size;
  spec.source_length = clip.frame_count();
  spec.magnitudes = FrameMatrix(stft_frame_count(clip.frame_count(), window_size, hop),
                                static_cast<std::size_t>(window_size / 2 + 1));
  return spec;
}

// Frames shorter than the window (only the single padded frame) are zero-filled.
void transform_frame(std::span<const double> x, std::span<const double> window, std::size_t start,
                     const detail::RealFft& fft, std::vector<double>& buf,
                     std::vector<std::complex<double>>& out, std::span<double> dst) {
  const std::size_t w = window.size();
  for (std::size_t n = 0; n < w; ++n) {
    const std::size_t idx = start + n;
    buf[n] = idx < x.size() ? x[idx] * window[n] : 0.0;
  }
  fft.forward(buf, out);
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = std::abs(out[k]);
}

}  // namespace

Spectrogram stft_serial(const AudioClip& clip, int window_size, int hop) {
  Spectrogram spec = make_empty(clip, window_size, hop);
  const auto window = hann(window_size);
  const detail::RealFft fft(window_size);
  std::vector<double> buf(static_cast<std::size_t>(window_size));
  std::vector<std::complex<double>> out(static_cast<std::size_t>(fft.bins()));
  const auto x = clip.samples();
  for (std::size_t i = 0; i < spec.frames(); ++i) {
    transform_frame(x, window, i * static_cast<std::size_t>(hop), fft, buf, out, spec.magnitudes.row(i));
  }
  return spec;
}

Spectrogram stft(const AudioClip& clip, int window_size, int hop) {
  Spectrogram spec = make_empty(clip, window_size, hop);
  const auto window = hann(window_size);
  const detail::RealFft fft(window_size);
  const auto x = clip.samples();
  const auto frames = static_cast<std::ptrdiff_t>(spec.frames());
#pragma omp parallel
  {
    std::vector<double> buf(static_cast<std::size_t>(window_size));
    std::vector<std::complex<double>> out(static_cast<std::size_t>(fft.bins()));
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < frames; ++i) {
      const auto row = static_cast<std::size_t>(i);
      transform_frame(x, window, row * static_cast<std::size_t>(hop), fft, buf, out, spec.magnitudes.row(row));
    }
  }
  return spec;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

FrameMatrix mel_filterbank(int n_mels, std::size_t n_bins, double bin_hz, double sample_rate) {
  if (n_mels < 1) throw std::invalid_argument("n_mels must be positive");
  FrameMatrix fb(static_cast<std::size_t>(n_mels), n_bins);
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double w = 0.0;
      if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
      fb(static_cast<std::size_t>(m), k) = w;
    }
  }
  return fb;
}

MfccMatrix mfcc(const Spectrogram& spec, int n_mels, int n_mfcc) {
  if (n_mfcc < 1 || n_mfcc > n_mels) throw std::invalid_argument("mfcc requires 1 <= n_mfcc <= n_mels");
  const auto fb = mel_filterbank(n_mels, spec.bins(), spec.bin_hz, spec.sample_rate);

  // Orthonormal DCT-II basis.
  FrameMatrix dct(static_cast<std::size_t>(n_mfcc), static_cast<std::size_t>(n_mels));
  for (int c = 0; c < n_mfcc; ++c) {
    const double scale = c == 0 ? std::sqrt(1.0 / n_mels) : std::sqrt(2.0 / n_mels);
    for (int m = 0; m < n_mels; ++m) {
      dct(c, m) = scale * std::cos(std::numbers::pi * c * (m + 0.5) / n_mels);
    }
  }

  MfccMatrix out;
  out.frame_hop_s = spec.frame_hop_s;
  out.coefficients = FrameMatrix(spec.frames(), static_cast<std::size_t>(n_mfcc));
  const auto frames = static_cast<std::ptrdiff_t>(spec.frames());
#pragma omp parallel
  {
    std::vector<double> logmel(static_cast<std::size_t>(n_mels));
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < frames; ++i) {
      const auto mags = spec.magnitudes.row(static_cast<std::size_t>(i));
      for (int m = 0; m < n_mels; ++m) {
        const auto filt = fb.row(static_cast<std::size_t>(m));
        double e = 0.0;
        for (std::size_t k = 0; k < mags.size(); ++k) e += filt[k] * mags[k] * mags[k];
        logmel[m] = std::log(std::max(e, kLogFloor));
      }
      auto dst = out.coefficients.row(static_cast<std::size_t>(i));
      for (int c = 0; c < n_mfcc; ++c) {
        double acc = 0.0;
        for (int m = 0; m < n_mels; ++m) acc += dct(c, m) * logmel[m];
        dst[c] = acc;
      }
    }
  }
  return out;
}

}  // namespace trackmate
