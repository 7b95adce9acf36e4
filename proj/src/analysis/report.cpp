#include "trackmate/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace trackmate {

namespace {

constexpr double kMinDuration = 1.0;
constexpr std::size_t kTopProgressions = 5;

double round_to(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double r = std::round(x * scale) / scale;
  return r == 0.0 ? 0.0 : r;  // no negative zero in documents
}

double ms(double t) { return round_to(t, 3); }

std::vector<double> section_energies(const AudioClip& mono, const std::vector<Section>& sections) {
  std::vector<double> out;
  out.reserve(sections.size());
  for (const auto& s : sections) {
    const auto slice = mono.slice(s.start, s.end);
    out.push_back(slice.frame_count() > 0 ? rms(slice.samples()) : 0.0);
  }
  return out;
}

}  // namespace

AnalysisBundle analyze_track(const AudioClip& clip, const AnalyzeOptions& options) {
  if (clip.frame_count() == 0 || clip.duration_s() < kMinDuration) {
    throw AnalysisError(fmt::format("clip is {:.2f} s long; at least {:.0f} s is required", clip.duration_s(),
                                    kMinDuration));
  }
  AnalysisBundle b;
  b.sample_rate = clip.sample_rate();
  b.source_hash = options.source_hash;

  const AudioClip mono = resample_mono(clip, kAnalysisRate);
  b.duration_s = mono.duration_s();
  const Spectrogram spec = stft(mono);
  const OnsetEnvelope env = onset_strength(spec, options.rhythm);
  b.onsets = detect_onsets(env, options.rhythm);
  const Chromagram chroma = chromagram(spec);
  const MfccMatrix mf = mfcc(spec);

  try {
    b.tempo = estimate_tempo(env, options.rhythm);
    b.beats = estimate_downbeats(track_beats(env, *b.tempo, options.rhythm), env, chroma);
  } catch (const NoRhythmicContent& e) {
    b.tempo.reset();
    b.beats = {};
    b.rhythm_absent_reason = e.what();
  }

  try {
    b.key = classify_key(chroma);
  } catch (const AmbiguousKey& e) {
    b.key_absent_reason = e.what();
  }
  b.chords = recognize_chords(chroma, b.duration_s, options.chords);
  b.timbre = timbral_descriptors(mono, spec, options.timbre);

  try {
    b.sections = segment_structure(chroma, mf, b.beats, b.duration_s, options.structure);
  } catch (const StructureTooShort&) {
    Section whole;
    whole.start = 0.0;
    whole.end = b.duration_s;
    b.sections = {whole};
  }
  const auto energies = section_energies(mono, b.sections);
  b.sections = label_functions(std::move(b.sections), energies);
  for (std::size_t i = 0; i < b.sections.size(); ++i) {
    auto& s = b.sections[i];
    s.energy = energies[i];
    EmotionInput in;
    if (b.tempo) in.tempo_bpm = b.tempo->bpm;
    if (b.key) in.mode = b.key->mode;
    in.energy = energies[i];
    in.brightness = b.timbre.brightness;
    s.emotion = classify_emotion(in);
    if (s.duration() >= 1.0) s.instruments = detect_instruments(mono.slice(s.start, s.end));
  }

  SemanticsFeatures features;
  if (b.tempo) features.tempo_bpm = b.tempo->bpm;
  features.key = b.key;
  features.sections = b.sections;
  features.timbre = b.timbre;
  b.semantics = classify_track_semantics(features, options.plugin);
  return b;
}

ChordStats chord_statistics(std::span<const ChordSegment> chords) {
  ChordStats st;
  for (std::size_t i = 1; i < chords.size(); ++i) {
    if (chords[i].label != chords[i - 1].label) ++st.total_changes;
  }

  std::vector<ChordLabel> voiced;
  double voiced_time = 0.0;
  // Total duration per label, in order of first appearance.
  std::vector<std::pair<ChordLabel, double>> durations;
  for (const auto& c : chords) {
    if (c.label.is_none()) continue;
    voiced.push_back(c.label);
    voiced_time += c.end - c.start;
    (c.label.quality() == Mode::kMajor ? st.major_count : st.minor_count) += 1;
    auto it = std::find_if(durations.begin(), durations.end(), [&](const auto& d) { return d.first == c.label; });
    if (it == durations.end()) durations.emplace_back(c.label, c.end - c.start);
    else it->second += c.end - c.start;
  }
  st.dominant_chord = ChordLabel::none();
  double best = -1.0;
  for (const auto& [label, d] : durations) {
    if (d > best) {
      best = d;
      st.dominant_chord = label;
    }
  }
  if (!voiced.empty()) st.avg_duration_s = voiced_time / static_cast<double>(voiced.size());

  struct Candidate {
    std::vector<ChordLabel> chords;
    int count = 0;
    std::size_t first = 0;
  };
  std::map<std::vector<int>, Candidate> grams;
  for (std::size_t n = 2; n <= 3; ++n) {
    for (std::size_t i = 0; i + n <= voiced.size(); ++i) {
      std::vector<int> key;
      for (std::size_t j = i; j < i + n; ++j) key.push_back(voiced[j].index());
      auto [it, inserted] = grams.try_emplace(key);
      if (inserted) {
        it->second.chords.assign(voiced.begin() + static_cast<std::ptrdiff_t>(i),
                                 voiced.begin() + static_cast<std::ptrdiff_t>(i + n));
        it->second.first = i;
      }
      ++it->second.count;
    }
  }
  std::vector<Candidate> ranked;
  for (auto& [key, c] : grams) ranked.push_back(std::move(c));
  std::sort(ranked.begin(), ranked.end(), [](const Candidate& a, const Candidate& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.first != b.first) return a.first < b.first;
    return a.chords.size() < b.chords.size();
  });
  for (std::size_t i = 0; i < ranked.size() && i < kTopProgressions; ++i) {
    st.top_progressions.push_back({ranked[i].chords, ranked[i].count});
  }
  return st;
}

double tempo_stability_cv(const BeatGrid& beats) {
  const auto& t = beats.beat_times_s;
  if (t.size() < 3) return 0.0;
  std::vector<double> ibi;
  for (std::size_t i = 1; i < t.size(); ++i) ibi.push_back(t[i] - t[i - 1]);
  const double mean = std::accumulate(ibi.begin(), ibi.end(), 0.0) / static_cast<double>(ibi.size());
  double var = 0.0;
  for (double d : ibi) var += (d - mean) * (d - mean);
  var /= static_cast<double>(ibi.size());
  return mean > 0.0 ? std::sqrt(var) / mean : 0.0;
}

MusicReport build_report(const AnalysisBundle& b, int depth) {
  if (depth < 1 || depth > 3) throw std::invalid_argument("report depth must be 1, 2 or 3");
  MusicReport r;
  r["schema_version"] = kReportSchemaVersion;
  r["depth"] = depth;
  r["track_meta"] = {{"duration_s", ms(b.duration_s)}, {"sample_rate", b.sample_rate}, {"source_hash", b.source_hash}};

  MusicReport rhythm = MusicReport::object();
  if (b.tempo) {
    rhythm["status"] = "ok";
    rhythm["tempo_bpm"] = round_to(b.tempo->bpm, 2);
    rhythm["tempo_confidence"] = round_to(b.tempo->confidence, 2);
  } else {
    rhythm["status"] = "absent";
    rhythm["reason"] = b.rhythm_absent_reason.empty() ? "no rhythmic content detected" : b.rhythm_absent_reason;
  }
  rhythm["beat_count"] = b.beats.size();
  rhythm["downbeat_count"] = b.beats.downbeat_count();
  rhythm["onset_count"] = b.onsets.times_s.size();

  MusicReport harmony = MusicReport::object();
  if (b.key) {
    harmony["key"] = {{"tonic", pitch_class_names()[static_cast<std::size_t>(b.key->tonic)]},
                      {"mode", b.key->mode == Mode::kMajor ? "major" : "minor"},
                      {"correlation", round_to(b.key->correlation, 2)}};
  } else {
    harmony["key"] = nullptr;
    harmony["key_reason"] = b.key_absent_reason.empty() ? "ambiguous key" : b.key_absent_reason;
  }
  auto chords = MusicReport::array();
  for (const auto& c : b.chords) chords.push_back({{"start", ms(c.start)}, {"end", ms(c.end)}, {"label", c.label.str()}});
  harmony["chords"] = std::move(chords);

  MusicReport timbre = MusicReport::object();
  const auto values = b.timbre.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    timbre[std::string(TimbralProfile::kNames[i])] = static_cast<int>(std::lround(values[i]));
  }

  MusicReport structure = MusicReport::object();
  auto sections = MusicReport::array();
  for (const auto& s : b.sections) {
    auto inst = MusicReport::array();
    for (const auto& t : s.instruments) {
      inst.push_back({{"name", std::string(to_string(t.name))}, {"confidence", round_to(t.confidence, 2)}});
    }
    sections.push_back({{"start", ms(s.start)},
                        {"end", ms(s.end)},
                        {"label", std::string(1, s.cluster)},
                        {"function", std::string(to_string(s.function))},
                        {"emotion", std::string(to_string(s.emotion.label))},
                        {"instruments", std::move(inst)}});
  }
  structure["sections"] = std::move(sections);

  MusicReport semantics = MusicReport::object();
  semantics["genre"] = b.semantics.genre;
  semantics["theme"] = b.semantics.theme;
  semantics["source"] = b.semantics.source == SemanticsSource::kPlugin ? "plugin" : "heuristic";
  if (b.semantics.warning) semantics["warning"] = *b.semantics.warning;

  const auto finish = [&]() {
    r["rhythm"] = rhythm;
    r["harmony"] = harmony;
    r["timbre"] = timbre;
    r["structure"] = structure;
    r["semantics"] = semantics;
    return r;
  };
  if (depth < 2) return finish();

  const ChordStats st = chord_statistics(b.chords);
  if (b.tempo) rhythm["tempo_stability_cv"] = round_to(tempo_stability_cv(b.beats), 4);
  rhythm["onset_density_per_s"] =
      round_to(b.duration_s > 0.0 ? static_cast<double>(b.onsets.times_s.size()) / b.duration_s : 0.0, 2);
  harmony["chord_stats"] = {{"total_changes", st.total_changes},
                            {"dominant_chord", st.dominant_chord.str()},
                            {"major_count", st.major_count},
                            {"minor_count", st.minor_count}};
  auto table = MusicReport::array();
  for (std::size_t i = 0; i < b.sections.size(); ++i) {
    const auto& s = b.sections[i];
    table.push_back({{"section", i},
                     {"label", std::string(1, s.cluster)},
                     {"emotion", std::string(to_string(s.emotion.label))},
                     {"valence", round_to(s.emotion.valence, 2)},
                     {"arousal", round_to(s.emotion.arousal, 2)},
                     {"energy", round_to(s.energy, 4)}});
  }
  structure["emotion_table"] = std::move(table);

  if (depth < 3) return finish();

  harmony["chord_stats"]["avg_chord_duration_s"] = ms(st.avg_duration_s);
  auto progressions = MusicReport::array();
  for (const auto& p : st.top_progressions) {
    auto seq = MusicReport::array();
    for (const auto& c : p.chords) seq.push_back(c.str());
    progressions.push_back({{"chords", std::move(seq)}, {"count", p.count}});
  }
  harmony["chord_stats"]["top_progressions"] = std::move(progressions);
  auto transitions = MusicReport::array();
  for (std::size_t i = 1; i < b.sections.size(); ++i) {
    const auto& a = b.sections[i - 1];
    const auto& c = b.sections[i];
    transitions.push_back({{"from", i - 1},
                           {"to", i},
                           {"at", ms(c.start)},
                           {"from_emotion", std::string(to_string(a.emotion.label))},
                           {"to_emotion", std::string(to_string(c.emotion.label))},
                           {"delta_valence", round_to(c.emotion.valence - a.emotion.valence, 2)},
                           {"delta_arousal", round_to(c.emotion.arousal - a.emotion.arousal, 2)}});
  }
  structure["emotion_transitions"] = std::move(transitions);
  return finish();
}

namespace {

std::string num(const MusicReport& v, int decimals) { return fmt::format("{:.{}f}", v.get<double>(), decimals); }

std::string join_chords(const MusicReport& seq) {
  std::string out;
  for (const auto& c : seq) {
    if (!out.empty()) out += " -> ";
    out += c.get<std::string>();
  }
  return out;
}

}  // namespace

std::string render_report(const MusicReport& r) {
  std::string out;
  auto line = [&out](const std::string& text) {
    out += text;
    out += '\n';
  };
  const auto& meta = r.at("track_meta");
  line(fmt::format("Music analysis report (schema {}, depth {})", r.at("schema_version").get<std::string>(),
                   r.at("depth").get<int>()));
  line(fmt::format("Duration {} s, sample rate {} Hz, source {}", num(meta.at("duration_s"), 2),
                   meta.at("sample_rate").get<int>(),
                   meta.at("source_hash").get<std::string>().empty() ? "unknown"
                                                                      : meta.at("source_hash").get<std::string>()));

  line("");
  line("RHYTHM");
  const auto& rh = r.at("rhythm");
  if (rh.at("status") == "ok") {
    line(fmt::format("Tempo: {} BPM (confidence {})", num(rh.at("tempo_bpm"), 2), num(rh.at("tempo_confidence"), 2)));
  } else {
    line(fmt::format("Tempo: no rhythmic content detected ({})", rh.at("reason").get<std::string>()));
  }
  line(fmt::format("Beats: {}, downbeats: {}, onsets: {}", rh.at("beat_count").get<int>(),
                   rh.at("downbeat_count").get<int>(), rh.at("onset_count").get<int>()));
  if (rh.contains("tempo_stability_cv")) {
    line(fmt::format("Tempo stability (coefficient of variation of beat intervals): {}",
                     num(rh.at("tempo_stability_cv"), 4)));
  }
  if (rh.contains("onset_density_per_s")) {
    line(fmt::format("Onset density: {} per second", num(rh.at("onset_density_per_s"), 2)));
  }

  line("");
  line("HARMONY");
  const auto& h = r.at("harmony");
  if (h.at("key").is_null()) {
    line(fmt::format("Key: undetermined ({})", h.at("key_reason").get<std::string>()));
  } else {
    const auto& k = h.at("key");
    line(fmt::format("Key: {} {} (correlation {})", k.at("tonic").get<std::string>(), k.at("mode").get<std::string>(),
                     num(k.at("correlation"), 2)));
  }
  line("Chords (start end label):");
  for (const auto& c : h.at("chords")) {
    line(fmt::format("  {} {} {}", num(c.at("start"), 2), num(c.at("end"), 2), c.at("label").get<std::string>()));
  }
  if (h.contains("chord_stats")) {
    const auto& st = h.at("chord_stats");
    line(fmt::format("Chord changes: {}, dominant chord: {}, major chords: {}, minor chords: {}",
                     st.at("total_changes").get<int>(), st.at("dominant_chord").get<std::string>(),
                     st.at("major_count").get<int>(), st.at("minor_count").get<int>()));
    if (st.contains("avg_chord_duration_s")) {
      line(fmt::format("Average chord duration: {} s", num(st.at("avg_chord_duration_s"), 2)));
    }
    if (st.contains("top_progressions")) {
      line(st.at("top_progressions").empty() ? "Common progressions: (none)" : "Common progressions:");
      for (const auto& p : st.at("top_progressions")) {
        line(fmt::format("  {} (x{})", join_chords(p.at("chords")), p.at("count").get<int>()));
      }
    }
  }

  line("");
  line("TIMBRE");
  std::string scores;
  for (const auto& [name, value] : r.at("timbre").items()) {
    if (!scores.empty()) scores += ", ";
    scores += fmt::format("{} {}", name, value.get<int>());
  }
  line(fmt::format("Scores (0-100): {}", scores));

  line("");
  line("STRUCTURE");
  const auto& s = r.at("structure");
  line("Sections (start end label function emotion instruments):");
  for (const auto& sec : s.at("sections")) {
    std::string inst;
    for (const auto& t : sec.at("instruments")) {
      if (!inst.empty()) inst += ", ";
      inst += fmt::format("{} {}", t.at("name").get<std::string>(), num(t.at("confidence"), 2));
    }
    line(fmt::format("  {} {} {} {} {} [{}]", num(sec.at("start"), 2), num(sec.at("end"), 2),
                     sec.at("label").get<std::string>(), sec.at("function").get<std::string>(),
                     sec.at("emotion").get<std::string>(), inst));
  }
  if (s.contains("emotion_table")) {
    line("Emotion by section (valence arousal energy):");
    for (const auto& e : s.at("emotion_table")) {
      line(fmt::format("  #{} {} {}: {} {} {}", e.at("section").get<int>(), e.at("label").get<std::string>(),
                       e.at("emotion").get<std::string>(), num(e.at("valence"), 2), num(e.at("arousal"), 2),
                       num(e.at("energy"), 4)));
    }
  }
  if (s.contains("emotion_transitions")) {
    line("Emotion transitions:");
    for (const auto& t : s.at("emotion_transitions")) {
      line(fmt::format("  #{} -> #{} at {}: {} -> {} (valence {:+.2f}, arousal {:+.2f})", t.at("from").get<int>(),
                       t.at("to").get<int>(), num(t.at("at"), 2), t.at("from_emotion").get<std::string>(),
                       t.at("to_emotion").get<std::string>(), t.at("delta_valence").get<double>(),
                       t.at("delta_arousal").get<double>()));
    }
  }

  line("");
  line("SEMANTICS");
  const auto& sem = r.at("semantics");
  line(fmt::format("Genre: {}, theme: {} (source: {})", sem.at("genre").get<std::string>(),
                   sem.at("theme").get<std::string>(), sem.at("source").get<std::string>()));
  if (sem.contains("warning")) line(fmt::format("Note: {}", sem.at("warning").get<std::string>()));
  return out;
}

}  // namespace trackmate
