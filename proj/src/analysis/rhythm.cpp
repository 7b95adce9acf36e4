#include "trackmate/rhythm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "trackmate/harmony.hpp"

namespace trackmate {

std::size_t OnsetEnvelope::frame_at(double t) const {
  if (strengths.empty() || frame_hop_s <= 0.0) return 0;
  const double idx = std::round((t - time_offset_s) / frame_hop_s);
  return static_cast<std::size_t>(std::clamp(idx, 0.0, static_cast<double>(strengths.size() - 1)));
}

std::size_t BeatGrid::downbeat_count() const {
  return static_cast<std::size_t>(std::count(downbeat_flags.begin(), downbeat_flags.end(), true));
}

OnsetEnvelope onset_strength(const Spectrogram& spec, const RhythmConfig& config) {
  OnsetEnvelope env;
  env.frame_hop_s = spec.frame_hop_s;
  env.time_offset_s = spec.sample_rate > 0
                          ? static_cast<double>(spec.window_size - spec.hop) / spec.sample_rate
                          : 0.0;
  env.duration_s = spec.duration_s();
  const std::size_t frames = spec.frames();
  env.strengths.assign(frames, 0.0);
  if (frames == 0) return env;

  const auto& mags = spec.magnitudes.data();
  const double peak = mags.empty() ? 0.0 : *std::max_element(mags.begin(), mags.end());
  // Normalizing by the global peak makes the envelope exactly gain invariant.
  if (peak < 1e-9) return env;
  const double gain = config.log_compression / peak;
  const std::size_t bins = spec.bins();

  std::vector<double> flux(frames, 0.0);
  const auto n = static_cast<std::ptrdiff_t>(frames);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 1; i < n; ++i) {
    const auto cur = spec.magnitudes.row(static_cast<std::size_t>(i));
    const auto prev = spec.magnitudes.row(static_cast<std::size_t>(i - 1));
    double acc = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double d = std::log1p(gain * cur[k]) - std::log1p(gain * prev[k]);
      if (d > 0.0) acc += d;
    }
    flux[static_cast<std::size_t>(i)] = acc / static_cast<double>(bins);
  }

  for (std::size_t i = 0; i < frames; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = std::min(frames - 1, i + 1);
    double acc = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) acc += flux[j];
    env.strengths[i] = acc / static_cast<double>(hi - lo + 1);
  }
  return env;
}

namespace {

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(values.size() - 1)));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

std::vector<double> moving_median(const std::vector<double>& x, std::size_t half) {
  std::vector<double> out(x.size());
  std::vector<double> buf;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(x.size() - 1, i + half);
    buf.assign(x.begin() + static_cast<std::ptrdiff_t>(lo), x.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    const auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
    std::nth_element(buf.begin(), mid, buf.end());
    out[i] = *mid;
  }
  return out;
}

}  // namespace

OnsetList detect_onsets(const OnsetEnvelope& env, const RhythmConfig& config) {
  OnsetList result;
  const auto& x = env.strengths;
  if (x.size() < 2 || env.frame_hop_s <= 0.0) return result;

  const auto half = static_cast<std::size_t>(std::round(config.median_window_s / 2.0 / env.frame_hop_s));
  const auto median = moving_median(x, half);
  const double delta = config.threshold_delta * percentile(x, 0.95);

  struct Peak {
    std::size_t index;
    double strength;
  };
  std::vector<Peak> peaks;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double prev = i > 0 ? x[i - 1] : 0.0;
    const double next = i + 1 < x.size() ? x[i + 1] : 0.0;
    if (x[i] <= 0.0 || x[i] < prev || x[i] <= next) continue;
    if (x[i] <= median[i] + delta) continue;
    peaks.push_back({i, x[i]});
  }
  std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.strength > b.strength; });

  std::vector<double> accepted;
  for (const auto& p : peaks) {
    const double t = std::clamp(env.time(p.index), 0.0, env.duration_s);
    const bool clash = std::any_of(accepted.begin(), accepted.end(),
                                   [&](double a) { return std::abs(a - t) < config.refractory_s; });
    if (!clash) accepted.push_back(t);
  }
  std::sort(accepted.begin(), accepted.end());
  result.times_s = std::move(accepted);
  return result;
}

double fold_tempo(double bpm, double min_bpm, double max_bpm) {
  if (!(bpm > 0.0)) return bpm;
  while (bpm < min_bpm) bpm *= 2.0;
  while (bpm >= max_bpm) bpm /= 2.0;
  return bpm;
}

double tempo_prior(double bpm, const RhythmConfig& config) {
  const double z = std::log2(bpm / config.prior_center_bpm) / config.prior_sigma_octaves;
  return std::exp(-0.5 * z * z);
}

namespace {

// Unbiased autocorrelation of the mean-removed envelope, normalized by the
// lag-zero value.
std::vector<double> autocorrelation(const std::vector<double>& env, std::size_t max_lag, double& energy) {
  const std::size_t n = env.size();
  const double mean = std::accumulate(env.begin(), env.end(), 0.0) / static_cast<double>(n);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = env[i] - mean;
  energy = 0.0;
  for (double v : x) energy += v * v;
  std::vector<double> r(max_lag + 1, 0.0);
  if (energy <= 0.0) return r;
  const double base = energy / static_cast<double>(n);
  const auto lags = static_cast<std::ptrdiff_t>(max_lag);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t lag = 0; lag <= lags; ++lag) {
    const auto l = static_cast<std::size_t>(lag);
    double acc = 0.0;
    for (std::size_t t = 0; t + l < n; ++t) acc += x[t] * x[t + l];
    r[l] = acc / static_cast<double>(n - l) / base;
  }
  return r;
}

// Position of the largest value in [lo, hi], refined by parabolic interpolation.
double refine_peak(const std::vector<double>& r, std::ptrdiff_t lo, std::ptrdiff_t hi) {
  lo = std::max<std::ptrdiff_t>(lo, 1);
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(r.size()) - 2);
  if (hi < lo) return static_cast<double>(std::clamp<std::ptrdiff_t>(lo, 0, static_cast<std::ptrdiff_t>(r.size()) - 1));
  std::ptrdiff_t best = lo;
  for (auto i = lo; i <= hi; ++i)
    if (r[static_cast<std::size_t>(i)] > r[static_cast<std::size_t>(best)]) best = i;
  const double a = r[static_cast<std::size_t>(best - 1)];
  const double b = r[static_cast<std::size_t>(best)];
  const double c = r[static_cast<std::size_t>(best + 1)];
  const double denom = a - 2.0 * b + c;
  double shift = 0.0;
  if (denom < 0.0) shift = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
  return static_cast<double>(best) + shift;
}

}  // namespace

TempoEstimate estimate_tempo(const OnsetEnvelope& env, const RhythmConfig& config) {
  const std::size_t n = env.size();
  if (n < 8 || env.frame_hop_s <= 0.0) throw NoRhythmicContent("envelope too short for tempo estimation");

  if (*std::max_element(env.strengths.begin(), env.strengths.end()) < config.min_flux_peak)
    throw NoRhythmicContent("no rhythmic content detected");

  const double hop = env.frame_hop_s;
  // Candidates span a wider band than the reported range and are folded in.
  constexpr double kFastestPulseBpm = 500.0;
  constexpr double kSlowestPulseBpm = 30.0;
  constexpr double kRefineSpan_s = 12.0;
  const auto min_lag = static_cast<std::size_t>(std::max(2.0, std::floor(60.0 / (kFastestPulseBpm * hop))));
  const auto search_max = static_cast<std::size_t>(std::ceil(60.0 / (kSlowestPulseBpm * hop)));
  const std::size_t max_lag = std::min(n - 2, std::max(search_max, static_cast<std::size_t>(kRefineSpan_s / hop)));
  if (max_lag <= min_lag + 1) throw NoRhythmicContent("envelope too short for tempo estimation");

  double energy = 0.0;
  const auto r = autocorrelation(env.strengths, max_lag, energy);
  if (energy <= 1e-18) throw NoRhythmicContent("no rhythmic content detected");

  // Prior-weighted peak picking over candidate periods.
  std::size_t best = 0;
  double best_score = 0.0;
  const std::size_t last = std::min(search_max, max_lag - 1);
  for (std::size_t lag = min_lag; lag <= last; ++lag) {
    if (r[lag] <= 0.0 || r[lag] < r[lag - 1] || r[lag] < r[lag + 1]) continue;
    const double bpm = fold_tempo(60.0 / (static_cast<double>(lag) * hop), config.min_bpm, config.max_bpm);
    const double score = r[lag] * tempo_prior(bpm, config);
    if (score > best_score) {
      best_score = score;
      best = lag;
    }
  }
  if (best == 0) throw NoRhythmicContent("no periodicity in onset envelope");

  // Prefer the fundamental pulse: if a half or third of the chosen period
  // is nearly as periodic, the chosen lag is a multiple of that pulse.
  bool moved = true;
  while (moved) {
    moved = false;
    for (int divisor : {2, 3}) {
      const double sub = static_cast<double>(best) / divisor;
      if (sub < static_cast<double>(min_lag)) continue;
      const auto lo = static_cast<std::size_t>(std::floor(sub)) - 1;
      const auto hi = static_cast<std::size_t>(std::ceil(sub)) + 1;
      std::size_t arg = lo;
      for (std::size_t j = lo; j <= hi; ++j)
        if (r[j] > r[arg]) arg = j;
      if (r[arg] >= config.subpulse_ratio * r[best]) {
        best = arg;
        moved = true;
        break;
      }
    }
  }

  const double confidence = std::clamp(r[best], 0.0, 1.0);
  if (confidence < config.min_confidence) throw NoRhythmicContent("no rhythmic content detected");

  // Refine the period on successive multiples of the lag.
  double period = refine_peak(r, static_cast<std::ptrdiff_t>(best) - 1, static_cast<std::ptrdiff_t>(best) + 1);
  for (int m = 2; m <= 16; ++m) {
    const double predicted = period * m;
    if (predicted + 3.0 > static_cast<double>(max_lag)) break;
    const auto centre = static_cast<std::ptrdiff_t>(std::llround(predicted));
    period = refine_peak(r, centre - 2, centre + 2) / m;
  }

  // The octave is decided by the candidate lag; refinement only nudges the
  // value, so a pulse refined to 59.98 BPM is clamped rather than doubled.
  const double candidate_bpm = 60.0 / (static_cast<double>(best) * hop);
  const double octave = fold_tempo(candidate_bpm, config.min_bpm, config.max_bpm) / candidate_bpm;
  TempoEstimate est;
  est.bpm = std::clamp(60.0 / (period * hop) * octave, config.min_bpm,
                       std::nextafter(config.max_bpm, config.min_bpm));
  est.confidence = confidence;
  return est;
}

BeatGrid track_beats(const OnsetEnvelope& env, const TempoEstimate& tempo, const RhythmConfig& config) {
  if (!(tempo.confidence > 0.0) || !(tempo.bpm > 0.0)) {
    throw std::invalid_argument("track_beats requires a confident tempo estimate");
  }
  BeatGrid grid;
  const std::size_t n = env.size();
  if (n == 0) return grid;

  // Normalize the envelope so the onset term and the regularizer are comparable.
  std::vector<double> onset = env.strengths;
  const double mean = std::accumulate(onset.begin(), onset.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double v : onset) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  const double scale = sd > 1e-12 ? sd : (mean > 0.0 ? mean : 1.0);
  for (auto& v : onset) v /= scale;

  const double period = 60.0 / (tempo.bpm * env.frame_hop_s);
  const auto reach_max = static_cast<std::size_t>(std::max(1.0, std::round(2.0 * period)));
  const auto reach_min = static_cast<std::size_t>(std::max(1.0, std::round(period / 2.0)));

  std::vector<double> score(n, 0.0);
  std::vector<std::ptrdiff_t> back(n, -1);
  for (std::size_t t = 0; t < n; ++t) {
    double best = 0.0;
    std::ptrdiff_t arg = -1;
    if (t >= reach_min) {
      const std::size_t lo = t >= reach_max ? t - reach_max : 0;
      for (std::size_t p = lo; p <= t - reach_min; ++p) {
        const double dev = std::log(static_cast<double>(t - p) / period);
        const double cand = score[p] - config.tightness * dev * dev;
        if (cand > best) {
          best = cand;
          arg = static_cast<std::ptrdiff_t>(p);
        }
      }
    }
    score[t] = onset[t] + best;
    back[t] = arg;
  }

  const auto tail = static_cast<std::size_t>(std::max(1.0, std::round(period)));
  std::size_t end = n - 1;
  for (std::size_t t = n > tail ? n - tail : 0; t < n; ++t)
    if (score[t] > score[end]) end = t;

  std::vector<std::size_t> frames;
  for (auto t = static_cast<std::ptrdiff_t>(end); t >= 0; t = back[static_cast<std::size_t>(t)]) {
    frames.push_back(static_cast<std::size_t>(t));
  }
  std::reverse(frames.begin(), frames.end());

  // Trim beats at either end that sit in near-silence: no onset within half a
  // period reaches a tenth of the typical beat strength. Quiet passages with
  // sparse hits keep their beats.
  double acc = 0.0;
  for (auto f : frames) acc += onset[f] * onset[f];
  const double cutoff = frames.empty() ? 0.0 : 0.1 * std::sqrt(acc / static_cast<double>(frames.size()));
  const auto reach = static_cast<std::size_t>(std::floor(period / 2.0));
  auto silent_around = [&](std::size_t f) {
    const std::size_t lo = f > reach ? f - reach : 0;
    const std::size_t hi = std::min(n - 1, f + reach);
    return *std::max_element(onset.begin() + static_cast<std::ptrdiff_t>(lo),
                             onset.begin() + static_cast<std::ptrdiff_t>(hi) + 1) < cutoff;
  };
  std::size_t first = 0;
  std::size_t stop = frames.size();
  while (first < stop && silent_around(frames[first])) ++first;
  while (stop > first && silent_around(frames[stop - 1])) --stop;

  for (std::size_t i = first; i < stop; ++i) {
    const double t = std::clamp(env.time(frames[i]), 0.0, env.duration_s);
    if (!grid.beat_times_s.empty() && t <= grid.beat_times_s.back()) continue;
    grid.beat_times_s.push_back(t);
  }
  grid.downbeat_flags.assign(grid.beat_times_s.size(), false);
  return grid;
}

namespace {

std::vector<std::array<double, 12>> beat_chroma(const BeatGrid& grid, const Chromagram& chroma) {
  std::vector<std::array<double, 12>> out(grid.size());
  for (std::size_t b = 0; b < grid.size(); ++b) {
    const double t0 = grid.beat_times_s[b];
    const double t1 = b + 1 < grid.size() ? grid.beat_times_s[b + 1] : std::numeric_limits<double>::infinity();
    std::array<double, 12> acc{};
    for (std::size_t f = 0; f < chroma.frames(); ++f) {
      const double c = chroma.frame_center(f);
      if (c < t0 || c >= t1) continue;
      const auto row = chroma.energies.row(f);
      for (int k = 0; k < 12; ++k) acc[k] += row[k];
    }
    out[b] = acc;
  }
  return out;
}

double chroma_change(const std::array<double, 12>& a, const std::array<double, 12>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int k = 0; k < 12; ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na <= 0.0 && nb <= 0.0) return 0.0;
  if (na <= 0.0 || nb <= 0.0) return 1.0;
  return 1.0 - dot / std::sqrt(na * nb);
}

}  // namespace

std::vector<double> downbeat_phase_scores(const BeatGrid& grid, const OnsetEnvelope& env, const Chromagram& chroma) {
  const std::size_t n = grid.size();
  std::vector<double> strength(n, 0.0);
  double peak = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    if (!env.strengths.empty()) strength[b] = env.strengths[env.frame_at(grid.beat_times_s[b])];
    peak = std::max(peak, strength[b]);
  }
  if (peak > 0.0)
    for (auto& s : strength) s /= peak;

  const auto bc = beat_chroma(grid, chroma);
  std::vector<double> change(n, 0.0);
  for (std::size_t b = 1; b < n; ++b) change[b] = chroma_change(bc[b - 1], bc[b]);

  std::vector<double> scores(4, -std::numeric_limits<double>::infinity());
  for (std::size_t p = 0; p < 4 && p < n; ++p) {
    double s = 0.0, c = 0.0;
    std::size_t count = 0;
    for (std::size_t b = p; b < n; b += 4) {
      s += strength[b];
      c += change[b];
      ++count;
    }
    scores[p] = (s + c) / static_cast<double>(count);
  }
  return scores;
}

BeatGrid estimate_downbeats(const BeatGrid& grid, const OnsetEnvelope& env, const Chromagram& chroma) {
  if (grid.size() == 0) throw std::invalid_argument("estimate_downbeats requires a non-empty beat grid");
  const auto scores = downbeat_phase_scores(grid, env, chroma);
  std::size_t phase = 0;
  for (std::size_t p = 1; p < scores.size(); ++p)
    if (scores[p] > scores[phase]) phase = p;

  BeatGrid out = grid;
  out.meter = 4;
  out.downbeat_flags.assign(out.size(), false);
  for (std::size_t b = phase; b < out.size(); b += 4) out.downbeat_flags[b] = true;
  return out;
}

}  // namespace trackmate
