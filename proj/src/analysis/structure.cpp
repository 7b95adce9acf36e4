#include "trackmate/structure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace trackmate {

std::string_view to_string(SectionFunction f) {
  switch (f) {
    case SectionFunction::kIntro: return "intro";
    case SectionFunction::kVerse: return "verse";
    case SectionFunction::kChorus: return "chorus";
    case SectionFunction::kBridge: return "bridge";
    case SectionFunction::kOutro: return "outro";
    case SectionFunction::kOther: return "other";
  }
  return "other";
}

std::string_view to_string(Emotion e) {
  switch (e) {
    case Emotion::kHappy: return "happy";
    case Emotion::kTense: return "tense";
    case Emotion::kSad: return "sad";
    case Emotion::kCalm: return "calm";
  }
  return "calm";
}

std::string_view to_string(Instrument i) {
  switch (i) {
    case Instrument::kDrums: return "drums";
    case Instrument::kBass: return "bass";
    case Instrument::kHarmonic: return "harmonic";
  }
  return "harmonic";
}

Emotion emotion_quadrant(double valence, double arousal) {
  const bool pleasant = valence >= 0.0;
  const bool energetic = arousal >= 0.0;
  if (pleasant) return energetic ? Emotion::kHappy : Emotion::kCalm;
  return energetic ? Emotion::kTense : Emotion::kSad;
}

namespace {

constexpr std::size_t kChromaDims = 12;

double median_of(std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

double pair_similarity(std::span<const double> a, std::span<const double> b, double bandwidth) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < kChromaDims; ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  double chroma_sim;
  if (na <= 0.0 && nb <= 0.0) chroma_sim = 1.0;
  else if (na <= 0.0 || nb <= 0.0) chroma_sim = 0.0;
  else chroma_sim = dot / std::sqrt(na * nb);

  double d2 = 0.0;
  for (std::size_t k = kChromaDims; k < a.size(); ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
  const double timbre_sim = std::exp(-d2 / (2.0 * bandwidth * bandwidth));
  return 0.5 * (chroma_sim + timbre_sim);
}

FrameMatrix smooth_rows(const FrameMatrix& x, int width) {
  if (width <= 1 || x.rows() == 0) return x;
  FrameMatrix out(x.rows(), x.cols());
  const auto lo_off = static_cast<std::ptrdiff_t>(width / 2);
  const auto hi_off = static_cast<std::ptrdiff_t>(width - 1 - width / 2);
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto lo = std::max<std::ptrdiff_t>(0, i - lo_off);
    const auto hi = std::min<std::ptrdiff_t>(n - 1, i + hi_off);
    auto dst = out.row(static_cast<std::size_t>(i));
    for (auto j = lo; j <= hi; ++j) {
      const auto src = x.row(static_cast<std::size_t>(j));
      for (std::size_t c = 0; c < x.cols(); ++c) dst[c] += src[c];
    }
    for (auto& v : dst) v /= static_cast<double>(hi - lo + 1);
  }
  return out;
}

}  // namespace

FrameMatrix beat_sync_features(const Chromagram& chroma, const MfccMatrix& mfcc, const BeatGrid& beats,
                               double duration_s) {
  const std::size_t n_mfcc = mfcc.coefficients.cols();
  const std::size_t dims = kChromaDims + n_mfcc;
  const std::size_t frames = std::min(chroma.frames(), mfcc.coefficients.rows());
  FrameMatrix out(beats.size(), dims);
  std::vector<double> column;
  std::vector<std::size_t> members;
  for (std::size_t b = 0; b < beats.size(); ++b) {
    const double t0 = beats.beat_times_s[b];
    const double t1 = b + 1 < beats.size() ? beats.beat_times_s[b + 1] : duration_s;
    members.clear();
    for (std::size_t f = 0; f < frames; ++f) {
      const double c = chroma.frame_center(f);
      if (c >= t0 && c < t1) members.push_back(f);
    }
    if (members.empty() && frames > 0) {
      // Beat shorter than a hop: use the nearest frame.
      std::size_t nearest = 0;
      for (std::size_t f = 1; f < frames; ++f)
        if (std::abs(chroma.frame_center(f) - t0) < std::abs(chroma.frame_center(nearest) - t0)) nearest = f;
      members.push_back(nearest);
    }
    auto dst = out.row(b);
    for (std::size_t d = 0; d < dims; ++d) {
      column.clear();
      for (auto f : members) {
        column.push_back(d < kChromaDims ? chroma.energies(f, d) : mfcc.coefficients(f, d - kChromaDims));
      }
      dst[d] = median_of(column);
    }
  }
  return out;
}

FrameMatrix self_similarity_serial(const FrameMatrix& features, const StructureConfig& config) {
  const std::size_t n = features.rows();
  FrameMatrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      s(i, j) = pair_similarity(features.row(i), features.row(j), config.timbre_bandwidth);
  return s;
}

FrameMatrix self_similarity(const FrameMatrix& features, const StructureConfig& config) {
  const std::size_t n = features.rows();
  FrameMatrix s(n, n);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < n; ++j) s(r, j) = pair_similarity(features.row(r), features.row(j), config.timbre_bandwidth);
  }
  return s;
}

std::vector<double> novelty_curve(const FrameMatrix& ssm, int kernel_beats) {
  const auto n = static_cast<std::ptrdiff_t>(ssm.rows());
  const int half = std::max(1, kernel_beats / 2);
  const double sigma = std::max(1.0, half / 2.0);
  std::vector<double> taper(static_cast<std::size_t>(2 * half));
  for (int a = -half; a < half; ++a) {
    const double x = a + 0.5;
    taper[static_cast<std::size_t>(a + half)] = std::exp(-x * x / (2.0 * sigma * sigma));
  }
  std::vector<double> novelty(static_cast<std::size_t>(n), 0.0);
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    double same = 0.0, same_w = 0.0, cross = 0.0, cross_w = 0.0;
    for (int a = -half; a < half; ++a) {
      const auto i = t + a;
      if (i < 0 || i >= n) continue;
      for (int b = -half; b < half; ++b) {
        const auto j = t + b;
        if (j < 0 || j >= n) continue;
        const double w = taper[static_cast<std::size_t>(a + half)] * taper[static_cast<std::size_t>(b + half)];
        const double v = ssm(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        if ((a < 0) == (b < 0)) {
          same += w * v;
          same_w += w;
        } else {
          cross += w * v;
          cross_w += w;
        }
      }
    }
    if (same_w > 0.0 && cross_w > 0.0) novelty[static_cast<std::size_t>(t)] = 0.5 * (same / same_w - cross / cross_w);
  }
  return novelty;
}

std::vector<Section> segment_structure(const Chromagram& chroma, const MfccMatrix& mfcc, const BeatGrid& beats,
                                       double duration_s, const StructureConfig& config) {
  if (beats.size() < 8) throw StructureTooShort("structure analysis needs at least 8 beats");

  const FrameMatrix raw = beat_sync_features(chroma, mfcc, beats, duration_s);
  const FrameMatrix ssm = self_similarity(smooth_rows(raw, config.smoothing_beats), config);
  const auto novelty = novelty_curve(ssm, config.kernel_beats);

  const auto n = static_cast<std::ptrdiff_t>(beats.size());
  const auto min_len = static_cast<std::ptrdiff_t>(config.min_section_beats);
  std::vector<std::ptrdiff_t> candidates;
  for (auto t = min_len; t <= n - min_len; ++t) {
    const double v = novelty[static_cast<std::size_t>(t)];
    const double prev = novelty[static_cast<std::size_t>(t - 1)];
    const double next = t + 1 < n ? novelty[static_cast<std::size_t>(t + 1)] : -std::numeric_limits<double>::infinity();
    if (v >= config.novelty_threshold && v >= prev && v > next) candidates.push_back(t);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](auto a, auto b) {
    return novelty[static_cast<std::size_t>(a)] > novelty[static_cast<std::size_t>(b)];
  });
  std::vector<std::ptrdiff_t> bounds;
  for (auto c : candidates) {
    const bool clash = std::any_of(bounds.begin(), bounds.end(), [&](auto b) { return std::abs(b - c) < min_len; });
    if (!clash) bounds.push_back(c);
  }
  std::sort(bounds.begin(), bounds.end());

  // Sections as beat-index ranges [first, last).
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::size_t prev = 0;
  for (auto b : bounds) {
    ranges.emplace_back(prev, static_cast<std::size_t>(b));
    prev = static_cast<std::size_t>(b);
  }
  ranges.emplace_back(prev, beats.size());

  // Section-mean features, then average-linkage clustering.
  std::vector<std::vector<double>> means;
  for (auto [first, last] : ranges) {
    std::vector<double> m(raw.cols(), 0.0);
    for (std::size_t b = first; b < last; ++b) {
      const auto row = raw.row(b);
      for (std::size_t d = 0; d < raw.cols(); ++d) m[d] += row[d];
    }
    for (auto& v : m) v /= static_cast<double>(last - first);
    means.push_back(std::move(m));
  }
  const std::size_t k = ranges.size();
  std::vector<std::vector<double>> dist(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      dist[i][j] = 1.0 - pair_similarity(means[i], means[j], config.timbre_bandwidth);

  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < k; ++i) clusters.push_back({i});
  auto linkage = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    double acc = 0.0;
    for (auto i : a)
      for (auto j : b) acc += dist[i][j];
    return acc / static_cast<double>(a.size() * b.size());
  };
  while (clusters.size() > 1) {
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < clusters.size(); ++i)
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        const double d = linkage(clusters[i], clusters[j]);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    const bool too_many = static_cast<int>(clusters.size()) > config.max_clusters;
    if (!too_many && best >= config.merge_distance) break;
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  std::vector<std::size_t> cluster_of(k, 0);
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (auto s : clusters[c]) cluster_of[s] = c;

  // Letters in order of first appearance.
  std::map<std::size_t, char> letter;
  std::vector<Section> sections;
  for (std::size_t s = 0; s < k; ++s) {
    const auto c = cluster_of[s];
    if (!letter.contains(c)) letter[c] = static_cast<char>('A' + letter.size());
    Section sec;
    sec.start = s == 0 ? 0.0 : beats.beat_times_s[ranges[s].first];
    sec.end = s + 1 == k ? duration_s : beats.beat_times_s[ranges[s].second];
    sec.cluster = letter[c];
    sections.push_back(sec);
  }
  return sections;
}

std::vector<Section> label_functions(std::vector<Section> sections, const std::vector<double>& energies) {
  if (energies.size() != sections.size()) throw std::invalid_argument("one energy value per section required");
  const std::size_t n = sections.size();
  for (auto& s : sections) s.function = SectionFunction::kOther;
  if (n == 0) return sections;

  double weighted = 0.0, total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    weighted += energies[i] * sections[i].duration();
    total += sections[i].duration();
  }
  const double track_mean = total > 0.0 ? weighted / total : 0.0;

  struct ClusterInfo {
    char letter;
    int count = 0;
    double energy = 0.0;
  };
  std::map<char, ClusterInfo> info;
  for (std::size_t i = 0; i < n; ++i) {
    auto& c = info[sections[i].cluster];
    c.letter = sections[i].cluster;
    ++c.count;
    c.energy += energies[i];
  }
  std::vector<ClusterInfo> repeated;
  for (auto& [letter, c] : info) {
    c.energy /= c.count;
    if (c.count >= 2) repeated.push_back(c);
  }
  std::stable_sort(repeated.begin(), repeated.end(), [](const ClusterInfo& a, const ClusterInfo& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.energy > b.energy;
  });
  const char chorus = repeated.size() >= 1 ? repeated[0].letter : '\0';
  const char verse = repeated.size() >= 2 ? repeated[1].letter : '\0';

  for (std::size_t i = 0; i < n; ++i) {
    auto& s = sections[i];
    if (s.cluster == chorus) s.function = SectionFunction::kChorus;
    else if (s.cluster == verse) s.function = SectionFunction::kVerse;
    else if (info[s.cluster].count == 1 && i > 0 && i + 1 < n) s.function = SectionFunction::kBridge;
  }
  if (n > 1) {
    if (energies.front() < 0.5 * track_mean) sections.front().function = SectionFunction::kIntro;
    if (energies.back() < 0.5 * track_mean) sections.back().function = SectionFunction::kOutro;
  }
  return sections;
}

EmotionTag classify_emotion(const EmotionInput& input) {
  constexpr double kReferenceRms = 0.25;
  EmotionTag tag;
  double valence = 0.0;
  if (input.mode) valence = *input.mode == Mode::kMajor ? 0.5 : -0.5;
  valence += 0.3 * (std::clamp(input.brightness, 0.0, 100.0) / 50.0 - 1.0);
  const double tempo_axis =
      input.tempo_bpm ? std::clamp((*input.tempo_bpm - 60.0) / 140.0 * 2.0 - 1.0, -1.0, 1.0) : 0.0;
  const double energy_axis = std::clamp(input.energy / kReferenceRms, 0.0, 1.0) * 2.0 - 1.0;
  tag.valence = std::clamp(valence, -1.0, 1.0);
  tag.arousal = std::clamp(0.5 * tempo_axis + 0.5 * energy_axis, -1.0, 1.0);
  tag.label = emotion_quadrant(tag.valence, tag.arousal);
  return tag;
}

namespace {

double median_window(std::vector<double>& buf) {
  const auto mid = buf.begin() + static_cast<std::ptrdiff_t>(buf.size() / 2);
  std::nth_element(buf.begin(), mid, buf.end());
  return *mid;
}

void harmonic_bin(const FrameMatrix& mag, std::size_t k, int half, FrameMatrix& out, std::vector<double>& buf) {
  const auto frames = static_cast<std::ptrdiff_t>(mag.rows());
  for (std::ptrdiff_t i = 0; i < frames; ++i) {
    buf.clear();
    for (auto j = std::max<std::ptrdiff_t>(0, i - half); j <= std::min(frames - 1, i + half); ++j)
      buf.push_back(mag(static_cast<std::size_t>(j), k));
    out(static_cast<std::size_t>(i), k) = median_window(buf);
  }
}

void percussive_frame(const FrameMatrix& mag, std::size_t i, int half, FrameMatrix& out, std::vector<double>& buf) {
  const auto bins = static_cast<std::ptrdiff_t>(mag.cols());
  for (std::ptrdiff_t k = 0; k < bins; ++k) {
    buf.clear();
    for (auto j = std::max<std::ptrdiff_t>(0, k - half); j <= std::min(bins - 1, k + half); ++j)
      buf.push_back(mag(i, static_cast<std::size_t>(j)));
    out(i, static_cast<std::size_t>(k)) = median_window(buf);
  }
}

}  // namespace

HpssMasks hpss_serial(const Spectrogram& spec, int kernel) {
  const int half = kernel / 2;
  HpssMasks m{FrameMatrix(spec.frames(), spec.bins()), FrameMatrix(spec.frames(), spec.bins())};
  std::vector<double> buf;
  for (std::size_t k = 0; k < spec.bins(); ++k) harmonic_bin(spec.magnitudes, k, half, m.harmonic, buf);
  for (std::size_t i = 0; i < spec.frames(); ++i) percussive_frame(spec.magnitudes, i, half, m.percussive, buf);
  return m;
}

HpssMasks hpss(const Spectrogram& spec, int kernel) {
  const int half = kernel / 2;
  HpssMasks m{FrameMatrix(spec.frames(), spec.bins()), FrameMatrix(spec.frames(), spec.bins())};
  const auto bins = static_cast<std::ptrdiff_t>(spec.bins());
  const auto frames = static_cast<std::ptrdiff_t>(spec.frames());
#pragma omp parallel
  {
    std::vector<double> buf;
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t k = 0; k < bins; ++k) harmonic_bin(spec.magnitudes, static_cast<std::size_t>(k), half, m.harmonic, buf);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < frames; ++i) percussive_frame(spec.magnitudes, static_cast<std::size_t>(i), half, m.percussive, buf);
  }
  return m;
}

InstrumentRatios instrument_ratios(const AudioClip& slice) {
  InstrumentRatios r;
  const Spectrogram spec = stft(slice);
  const HpssMasks med = hpss(spec);
  // Percussive/harmonic shares are magnitude weighted so sustained low tones
  // do not drown out drum hits; the bass share stays power weighted.
  constexpr double kBassCeilingHz = 150.0;
  double m_h = 0.0, m_p = 0.0, power = 0.0, bass = 0.0;
  for (std::size_t i = 0; i < spec.frames(); ++i) {
    for (std::size_t k = 1; k < spec.bins(); ++k) {
      const double x = spec.magnitudes(i, k);
      const double h2 = med.harmonic(i, k) * med.harmonic(i, k);
      const double p2 = med.percussive(i, k) * med.percussive(i, k);
      if (h2 + p2 <= 0.0) continue;
      const double mh = h2 / (h2 + p2);
      m_h += mh * x;
      m_p += (1.0 - mh) * x;
      power += x * x;
      if (static_cast<double>(k) * spec.bin_hz < kBassCeilingHz) bass += mh * x * x;
    }
  }
  if (m_h + m_p <= 1e-12 || power <= 1e-20) return r;
  r.percussive = m_p / (m_h + m_p);
  r.harmonic = m_h / (m_h + m_p);
  r.harmonic_bass = bass / power;
  return r;
}

namespace {

double rescale(double ratio, double threshold) {
  if (ratio <= threshold) return 0.5 * ratio / threshold;
  return std::min(1.0, 0.5 + 0.5 * (ratio - threshold) / (1.0 - threshold));
}

}  // namespace

std::vector<InstrumentTag> detect_instruments(const AudioClip& slice) {
  if (slice.channels() != 1) throw std::invalid_argument("detect_instruments expects a mono slice");
  if (slice.duration_s() < 1.0) throw std::invalid_argument("detect_instruments needs at least one second of audio");
  const auto r = instrument_ratios(slice);
  std::vector<InstrumentTag> tags;
  const std::pair<Instrument, double> checks[] = {
      {Instrument::kDrums, rescale(r.percussive, 0.2)},
      {Instrument::kBass, rescale(r.harmonic_bass, 0.15)},
      {Instrument::kHarmonic, rescale(r.harmonic, 0.3)},
  };
  for (const auto& [name, conf] : checks) {
    if (conf > 0.5) tags.push_back({name, conf});
  }
  return tags;
}

}  // namespace trackmate
