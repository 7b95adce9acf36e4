#include "trackmate/timbre.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <stdexcept>

#include "fft.hpp"

namespace trackmate {

namespace {

constexpr double kActiveFrameGate = 1e-3;  // relative to the loudest frame

double band_power(const std::vector<double>& power, double bin_hz, double lo, double hi) {
  double acc = 0.0;
  for (std::size_t k = 1; k < power.size(); ++k) {
    const double f = static_cast<double>(k) * bin_hz;
    if (f >= lo && f < hi) acc += power[k];
  }
  return acc;
}

double attack_slope(const AudioClip& clip, int window, int hop) {
  const auto x = clip.samples();
  const std::size_t frames = stft_frame_count(x.size(), window, hop);
  std::vector<double> level(frames, 0.0);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::size_t b = i * static_cast<std::size_t>(hop);
    const std::size_t e = std::min(x.size(), b + static_cast<std::size_t>(window));
    if (b < e) level[i] = rms(x.subspan(b, e - b));
  }
  const double peak = level.empty() ? 0.0 : *std::max_element(level.begin(), level.end());
  if (peak <= 1e-12 || frames < 2) return 0.0;
  const double hop_s = static_cast<double>(hop) / clip.sample_rate();
  std::vector<double> slopes;
  for (std::size_t i = 1; i < frames; ++i) {
    const double d = (level[i] - level[i - 1]) / peak / hop_s;
    if (d > 0.0) slopes.push_back(d);
  }
  if (slopes.empty()) return 0.0;
  // Mean of the steepest tenth of the rises: the attacks.
  std::sort(slopes.begin(), slopes.end(), std::greater<>());
  const std::size_t take = std::max<std::size_t>(1, slopes.size() / 10);
  double acc = 0.0;
  for (std::size_t i = 0; i < take; ++i) acc += slopes[i];
  return acc / static_cast<double>(take);
}

// Share of amplitude-envelope modulation energy between 20 and 150 Hz.
double modulation_roughness(const AudioClip& clip) {
  const auto x = clip.samples();
  constexpr double kEnvelopeRate = 1000.0;
  const auto block = static_cast<std::size_t>(std::max(1.0, std::round(clip.sample_rate() / kEnvelopeRate)));
  const double env_rate = static_cast<double>(clip.sample_rate()) / static_cast<double>(block);
  std::vector<double> env;
  env.reserve(x.size() / block + 1);
  for (std::size_t b = 0; b + block <= x.size(); b += block) {
    double acc = 0.0;
    for (std::size_t i = b; i < b + block; ++i) acc += std::abs(x[i]);
    env.push_back(acc / static_cast<double>(block));
  }
  constexpr int kChunk = 1024;
  constexpr int kChunkHop = 512;
  if (env.size() < static_cast<std::size_t>(kChunk)) env.resize(kChunk, 0.0);

  const detail::RealFft fft(kChunk);
  std::vector<double> buf(kChunk);
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(fft.bins()));
  const double bin_hz = env_rate / kChunk;
  double band = 0.0, total = 0.0;
  for (std::size_t start = 0; start + kChunk <= env.size(); start += kChunkHop) {
    double mean = 0.0;
    for (int i = 0; i < kChunk; ++i) mean += env[start + static_cast<std::size_t>(i)];
    mean /= kChunk;
    for (int i = 0; i < kChunk; ++i) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / kChunk);
      buf[static_cast<std::size_t>(i)] = (env[start + static_cast<std::size_t>(i)] - mean) * w;
    }
    fft.forward(buf, spec);
    for (std::size_t k = 1; k < spec.size(); ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      if (f > 500.0) break;
      const double p = std::norm(spec[k]);
      total += p;
      if (f >= 20.0 && f <= 150.0) band += p;
    }
  }
  return total > 0.0 ? band / total : 0.0;
}

}  // namespace

RawTimbre raw_timbre(const AudioClip& clip, const Spectrogram& spec) {
  if (clip.channels() != 1) throw std::invalid_argument("timbral_descriptors expects a mono clip");
  RawTimbre raw;
  const std::size_t bins = spec.bins();
  if (spec.frames() == 0 || bins < 2) return raw;
  const double nyquist = spec.bin_hz * static_cast<double>(bins - 1);

  std::vector<double> frame_energy(spec.frames(), 0.0);
  for (std::size_t i = 0; i < spec.frames(); ++i) {
    const auto m = spec.magnitudes.row(i);
    for (std::size_t k = 1; k < bins; ++k) frame_energy[i] += m[k] * m[k];
  }
  const double loudest = *std::max_element(frame_energy.begin(), frame_energy.end());
  if (loudest <= 1e-20) return raw;

  std::vector<double> power(bins, 0.0);
  double centroid_sum = 0.0;
  std::size_t active = 0;
  for (std::size_t i = 0; i < spec.frames(); ++i) {
    const auto m = spec.magnitudes.row(i);
    for (std::size_t k = 1; k < bins; ++k) power[k] += m[k] * m[k];
    if (frame_energy[i] < kActiveFrameGate * loudest) continue;
    double num = 0.0, den = 0.0;
    for (std::size_t k = 1; k < bins; ++k) {
      num += static_cast<double>(k) * spec.bin_hz * m[k];
      den += m[k];
    }
    if (den > 0.0) {
      centroid_sum += num / den / nyquist;
      ++active;
    }
  }
  double total = 0.0;
  for (std::size_t k = 1; k < bins; ++k) total += power[k];

  raw.brightness = active > 0 ? centroid_sum / static_cast<double>(active) : 0.0;
  raw.warmth = band_power(power, spec.bin_hz, 100.0, 500.0) / total;
  raw.depth = band_power(power, spec.bin_hz, 0.0, 120.0) / total;
  raw.sharpness = band_power(power, spec.bin_hz, 5000.0, nyquist + spec.bin_hz) / total;

  const double boom_band = band_power(power, spec.bin_hz, 20.0, 200.0);
  double boom_peak = 0.0;
  for (std::size_t k = 1; k < bins; ++k) {
    const double f = static_cast<double>(k) * spec.bin_hz;
    if (f >= 20.0 && f < 200.0) boom_peak = std::max(boom_peak, power[k]);
  }
  const double resonance = boom_band > 0.0 ? boom_peak / boom_band : 0.0;
  raw.boominess = boom_band / total * (0.5 + 0.5 * resonance);

  raw.hardness = attack_slope(clip, spec.window_size, spec.hop);
  raw.roughness = modulation_roughness(clip);
  return raw;
}

TimbralProfile squash_timbre(const RawTimbre& raw, const TimbreConfig& config) {
  auto squash = [](double x, double k) { return x > 0.0 ? 100.0 * x / (x + k) : 0.0; };
  TimbralProfile p;
  p.brightness = squash(raw.brightness, config.brightness_k);
  p.warmth = squash(raw.warmth, config.warmth_k);
  p.depth = squash(raw.depth, config.depth_k);
  p.hardness = squash(raw.hardness, config.hardness_k);
  p.roughness = squash(raw.roughness, config.roughness_k);
  p.sharpness = squash(raw.sharpness, config.sharpness_k);
  p.boominess = squash(raw.boominess, config.boominess_k);
  return p;
}

TimbralProfile timbral_descriptors(const AudioClip& clip, const Spectrogram& spec, const TimbreConfig& config) {
  return squash_timbre(raw_timbre(clip, spec), config);
}

}  // namespace trackmate
