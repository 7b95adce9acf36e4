#include "trackmate/harmony.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace trackmate {

const std::array<const char*, 12>& pitch_class_names() {
  static const std::array<const char*, 12> names = {"C",  "C#", "D",  "D#", "E",  "F",
                                                    "F#", "G",  "G#", "A",  "A#", "B"};
  return names;
}

bool Chromagram::silent(std::size_t i) const {
  const auto row = energies.row(i);
  return std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; });
}

std::string KeyEstimate::name() const {
  return std::string(pitch_class_names()[static_cast<std::size_t>(tonic)]) +
         (mode == Mode::kMajor ? " major" : " minor");
}

ChordLabel ChordLabel::from_index(int index) {
  if (index < 0 || index > kNoChord) throw std::invalid_argument("chord index out of range");
  ChordLabel l;
  l.index_ = index;
  return l;
}

ChordLabel ChordLabel::parse(std::string_view text) {
  if (text == "N") return none();
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("bad chord label '" + std::string(text) + "'");
  const auto root = text.substr(0, colon);
  const auto quality = text.substr(colon + 1);
  const auto& names = pitch_class_names();
  const auto it = std::find_if(names.begin(), names.end(), [&](const char* n) { return root == n; });
  if (it == names.end()) throw std::invalid_argument("bad chord root '" + std::string(root) + "'");
  const int pc = static_cast<int>(it - names.begin());
  if (quality == "maj") return triad(pc, Mode::kMajor);
  if (quality == "min") return triad(pc, Mode::kMinor);
  throw std::invalid_argument("bad chord quality '" + std::string(quality) + "'");
}

std::string ChordLabel::str() const {
  if (is_none()) return "N";
  return std::string(pitch_class_names()[static_cast<std::size_t>(root())]) +
         (quality() == Mode::kMajor ? ":maj" : ":min");
}

ChordLabel ChordLabel::transposed(int semitones) const {
  if (is_none()) return *this;
  return triad(root() + semitones, quality());
}

Chromagram chromagram(const Spectrogram& spec, const ChromaConfig& config) {
  Chromagram chroma;
  chroma.frame_hop_s = spec.frame_hop_s;
  chroma.window_s = spec.sample_rate > 0 ? static_cast<double>(spec.window_size) / spec.sample_rate : 0.0;
  chroma.energies = FrameMatrix(spec.frames(), 12);

  std::vector<int> bin_class(spec.bins(), -1);
  for (std::size_t k = 1; k < spec.bins(); ++k) {
    const double f = static_cast<double>(k) * spec.bin_hz;
    if (f < config.min_hz || f > config.max_hz) continue;
    const auto semis = static_cast<int>(std::lround(12.0 * std::log2(f / 440.0)));
    bin_class[k] = ((semis + 9) % 12 + 12) % 12;
  }

  std::vector<double> frame_energy(spec.frames(), 0.0);
  for (std::size_t i = 0; i < spec.frames(); ++i) {
    const auto mags = spec.magnitudes.row(i);
    auto dst = chroma.energies.row(i);
    for (std::size_t k = 0; k < mags.size(); ++k) {
      if (bin_class[k] >= 0) dst[static_cast<std::size_t>(bin_class[k])] += mags[k] * mags[k];
    }
    frame_energy[i] = std::accumulate(dst.begin(), dst.end(), 0.0);
  }

  const double loudest = frame_energy.empty() ? 0.0 : *std::max_element(frame_energy.begin(), frame_energy.end());
  for (std::size_t i = 0; i < spec.frames(); ++i) {
    auto dst = chroma.energies.row(i);
    if (loudest < 1e-20 || frame_energy[i] < config.silence_gate * loudest) {
      std::fill(dst.begin(), dst.end(), 0.0);
      continue;
    }
    double norm = 0.0;
    for (double v : dst) norm += v * v;
    norm = std::sqrt(norm);
    for (auto& v : dst) v /= norm;
  }
  return chroma;
}

const std::array<double, 12>& major_key_profile() {
  // Krumhansl & Kessler (1982) probe-tone ratings, C major.
  static const std::array<double, 12> p = {6.35, 2.23, 3.48, 2.33, 4.38, 4.09,
                                           2.52, 5.19, 2.39, 3.66, 2.29, 2.88};
  return p;
}

const std::array<double, 12>& minor_key_profile() {
  // Krumhansl & Kessler (1982) probe-tone ratings, C minor.
  static const std::array<double, 12> p = {6.33, 2.68, 3.52, 5.38, 2.60, 3.53,
                                           2.54, 4.75, 3.98, 2.69, 3.34, 3.17};
  return p;
}

namespace {

double pearson(const std::array<double, 12>& a, const std::array<double, 12>& b) {
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / 12.0;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / 12.0;
  double num = 0.0, da = 0.0, db = 0.0;
  for (int k = 0; k < 12; ++k) {
    num += (a[k] - ma) * (b[k] - mb);
    da += (a[k] - ma) * (a[k] - ma);
    db += (b[k] - mb) * (b[k] - mb);
  }
  return num / std::sqrt(da * db);
}

std::array<double, 12> rotate_profile(const std::array<double, 12>& profile, int tonic) {
  std::array<double, 12> out{};
  for (int pc = 0; pc < 12; ++pc) out[pc] = profile[((pc - tonic) % 12 + 12) % 12];
  return out;
}

}  // namespace

KeyEstimate classify_key(const Chromagram& chroma) {
  std::array<double, 12> mean{};
  std::size_t voiced = 0;
  for (std::size_t i = 0; i < chroma.frames(); ++i) {
    if (chroma.silent(i)) continue;
    const auto row = chroma.energies.row(i);
    for (int k = 0; k < 12; ++k) mean[k] += row[k];
    ++voiced;
  }
  if (voiced == 0) throw AmbiguousKey("no pitched content");
  for (auto& v : mean) v /= static_cast<double>(voiced);
  const double mu = std::accumulate(mean.begin(), mean.end(), 0.0) / 12.0;
  double var = 0.0;
  for (double v : mean) var += (v - mu) * (v - mu);
  if (var < 1e-18) throw AmbiguousKey("pitch-class distribution is flat");

  KeyEstimate best;
  best.correlation = -std::numeric_limits<double>::infinity();
  for (int tonic = 0; tonic < 12; ++tonic) {
    for (Mode mode : {Mode::kMajor, Mode::kMinor}) {
      const auto& profile = mode == Mode::kMajor ? major_key_profile() : minor_key_profile();
      const double c = pearson(mean, rotate_profile(profile, tonic));
      if (c > best.correlation) {
        best.tonic = tonic;
        best.mode = mode;
        best.correlation = c;
      }
    }
  }
  return best;
}

namespace {

std::array<std::array<double, 12>, 24> triad_templates() {
  std::array<std::array<double, 12>, 24> t{};
  const double v = 1.0 / std::sqrt(3.0);
  for (int root = 0; root < 12; ++root) {
    t[root][root] = t[root][(root + 4) % 12] = t[root][(root + 7) % 12] = v;
    t[12 + root][root] = t[12 + root][(root + 3) % 12] = t[12 + root][(root + 7) % 12] = v;
  }
  return t;
}

void emit_frame(std::span<const double> x, const std::array<std::array<double, 12>, 24>& templates,
                double no_chord_weight, std::span<double> dst) {
  double norm = 0.0, sum = 0.0;
  for (double v : x) {
    norm += v * v;
    sum += v;
  }
  if (norm <= 0.0) {
    std::fill(dst.begin(), dst.end(), 0.0);
    dst[ChordLabel::kNoChord] = 1.0;
    return;
  }
  norm = std::sqrt(norm);
  for (std::size_t c = 0; c < 24; ++c) {
    double dot = 0.0;
    for (int k = 0; k < 12; ++k) dot += templates[c][k] * x[k];
    dst[c] = std::max(0.0, dot / norm);
  }
  dst[ChordLabel::kNoChord] = no_chord_weight * sum / (norm * std::sqrt(12.0));
}

}  // namespace

FrameMatrix chord_emissions_serial(const Chromagram& chroma, const ChordConfig& config) {
  const auto templates = triad_templates();
  FrameMatrix out(chroma.frames(), 25);
  for (std::size_t i = 0; i < chroma.frames(); ++i) {
    emit_frame(chroma.energies.row(i), templates, config.no_chord_weight, out.row(i));
  }
  return out;
}

FrameMatrix chord_emissions(const Chromagram& chroma, const ChordConfig& config) {
  const auto templates = triad_templates();
  FrameMatrix out(chroma.frames(), 25);
  const auto frames = static_cast<std::ptrdiff_t>(chroma.frames());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < frames; ++i) {
    const auto r = static_cast<std::size_t>(i);
    emit_frame(chroma.energies.row(r), templates, config.no_chord_weight, out.row(r));
  }
  return out;
}

namespace {

std::vector<int> viterbi(const FrameMatrix& emissions, double self_transition) {
  const std::size_t frames = emissions.rows();
  const std::size_t states = emissions.cols();
  std::vector<int> path(frames, ChordLabel::kNoChord);
  if (frames == 0) return path;

  const double log_stay = std::log(self_transition);
  const double log_move = std::log((1.0 - self_transition) / static_cast<double>(states - 1));
  auto log_emit = [&](std::size_t i, std::size_t s) { return std::log(std::max(emissions(i, s), 1e-6)); };

  std::vector<double> prev(states), cur(states);
  std::vector<std::vector<int>> back(frames, std::vector<int>(states, 0));
  for (std::size_t s = 0; s < states; ++s) prev[s] = log_emit(0, s) - std::log(static_cast<double>(states));
  for (std::size_t i = 1; i < frames; ++i) {
    std::size_t best_prev = 0;
    for (std::size_t s = 1; s < states; ++s)
      if (prev[s] > prev[best_prev]) best_prev = s;
    for (std::size_t s = 0; s < states; ++s) {
      const double stay = prev[s] + log_stay;
      const double move = prev[best_prev] + log_move;
      if (best_prev != s && move > stay) {
        cur[s] = move;
        back[i][s] = static_cast<int>(best_prev);
      } else {
        cur[s] = stay;
        back[i][s] = static_cast<int>(s);
      }
      cur[s] += log_emit(i, s);
    }
    std::swap(prev, cur);
  }
  std::size_t state = 0;
  for (std::size_t s = 1; s < states; ++s)
    if (prev[s] > prev[state]) state = s;
  for (std::size_t i = frames; i-- > 0;) {
    path[i] = static_cast<int>(state);
    state = static_cast<std::size_t>(back[i][state]);
  }
  return path;
}

void coalesce(std::vector<ChordSegment>& segs) {
  std::vector<ChordSegment> out;
  for (const auto& s : segs) {
    if (s.end <= s.start) continue;
    if (!out.empty() && out.back().label == s.label) {
      out.back().end = s.end;
    } else {
      out.push_back(s);
    }
  }
  segs = std::move(out);
}

}  // namespace

std::vector<ChordSegment> recognize_chords(const Chromagram& chroma, double duration_s, const ChordConfig& config) {
  if (!(duration_s > 0.0)) throw std::invalid_argument("recognize_chords requires a positive duration");
  std::vector<ChordSegment> segs;
  if (chroma.frames() == 0) {
    segs.push_back({0.0, duration_s, ChordLabel::none()});
    return segs;
  }

  const auto path = viterbi(chord_emissions(chroma, config), config.self_transition);
  double start = 0.0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const bool last = i + 1 == path.size();
    if (!last && path[i + 1] == path[i]) continue;
    double end = last ? duration_s : 0.5 * (chroma.frame_center(i) + chroma.frame_center(i + 1));
    end = std::clamp(end, 0.0, duration_s);
    segs.push_back({start, end, ChordLabel::from_index(path[i])});
    start = end;
  }
  coalesce(segs);

  // Fold segments shorter than the minimum duration into their longer neighbour.
  while (segs.size() > 1) {
    std::size_t shortest = 0;
    for (std::size_t i = 1; i < segs.size(); ++i)
      if (segs[i].end - segs[i].start < segs[shortest].end - segs[shortest].start) shortest = i;
    if (segs[shortest].end - segs[shortest].start >= config.min_duration_s) break;
    std::size_t target;
    if (shortest == 0) {
      target = 1;
    } else if (shortest + 1 == segs.size()) {
      target = shortest - 1;
    } else {
      const double left = segs[shortest - 1].end - segs[shortest - 1].start;
      const double right = segs[shortest + 1].end - segs[shortest + 1].start;
      target = right > left ? shortest + 1 : shortest - 1;
    }
    if (target < shortest) {
      segs[target].end = segs[shortest].end;
    } else {
      segs[target].start = segs[shortest].start;
    }
    segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(shortest));
    coalesce(segs);
  }
  if (segs.empty()) segs.push_back({0.0, duration_s, ChordLabel::none()});
  segs.front().start = 0.0;
  segs.back().end = duration_s;
  return segs;
}

Chromagram rotate_chroma(const Chromagram& chroma, int semitones) {
  Chromagram out = chroma;
  for (std::size_t i = 0; i < chroma.frames(); ++i) {
    const auto src = chroma.energies.row(i);
    auto dst = out.energies.row(i);
    for (int k = 0; k < 12; ++k) dst[static_cast<std::size_t>(((k + semitones) % 12 + 12) % 12)] = src[k];
  }
  return out;
}

}  // namespace trackmate
