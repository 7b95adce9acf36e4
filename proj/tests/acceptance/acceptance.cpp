// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <fmt/format.h>
#include <httplib.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>

#include "chord_oracle.hpp"
#include "metrics.hpp"
#include "report_paths.hpp"
#include "synth.hpp"
#include "trackmate/harmony.hpp"
#include "trackmate/llm/refine.hpp"
#include "trackmate/llm/session.hpp"
#include "trackmate/report.hpp"
#include "trackmate/rhythm.hpp"
#include "trackmate/service/service.hpp"
#include "trackmate/spectral.hpp"
#include "trackmate/structure.hpp"
#include "trackmate/timbre.hpp"

using namespace trackmate;
using namespace trackmate::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void fail(std::string why) {
    if (pass) detail = std::move(why);
    pass = false;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome tempo_beats() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::string summary;
  for (double bpm : {60.0, 90.0, 120.0, 150.0, 180.0}) {
    const auto ct = click_track(bpm, 15.0);
    const auto env = onset_strength(stft(ct.clip));
    const auto tempo = estimate_tempo(env);
    const auto grid = track_beats(env, tempo);
    const double err = std::abs(fold_tempo(tempo.bpm) - fold_tempo(bpm));
    const double f = beat_f_measure(grid.beat_times_s, ct.beat_times, 0.07);
    summary += fmt::format(" {:.0f}:{:.2f}/F{:.2f}", bpm, tempo.bpm, f);
    if (err > 2.0) o.fail(fmt::format("{} BPM estimated as {:.2f}", bpm, tempo.bpm));
    if (f < 0.9) o.fail(fmt::format("{} BPM beat F-measure {:.3f}", bpm, f));
  }
  const double elapsed = seconds_since(t0);
  if (elapsed >= 10.0) o.fail(fmt::format("took {:.1f} s", elapsed));
  if (o.pass) o.detail = fmt::format("{} in {:.2f} s", summary.substr(1), elapsed);
  return o;
}

Outcome keys() {
  Outcome o;
  int correct = 0;
  for (int t = 0; t < 12; ++t)
    for (Mode m : {Mode::kMajor, Mode::kMinor}) {
      const auto k = classify_key(chromagram(stft(cadence(t, m))));
      correct += k.tonic == t && k.mode == m;
    }
  if (correct < 20) o.fail(fmt::format("{}/24 cadences", correct));
  const auto base = chromagram(stft(cadence(9, Mode::kMinor)));
  const auto k0 = classify_key(base);
  for (int s = 0; s < 12; ++s) {
    const auto k = classify_key(rotate_chroma(base, s));
    if (k.tonic != (k0.tonic + s) % 12 || k.mode != k0.mode || std::abs(k.correlation - k0.correlation) > 1e-9)
      o.fail(fmt::format("rotation {} breaks equivariance", s));
  }
  if (o.pass) o.detail = fmt::format("{}/24 cadences, 12/12 rotations", correct);
  return o;
}

Outcome chords() {
  Outcome o;
  std::mt19937 rng(20240);
  std::uniform_int_distribution<int> idx(0, 23);
  double worst = 1.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ChordLabel> truth;
    for (int i = 0; i < 8; ++i) truth.push_back(ChordLabel::from_index(idx(rng)));
    const auto clip = chord_sequence(truth, 2.0);
    const auto segs = recognize_chords(chromagram(stft(clip)), clip.duration_s());
    if (!tiles(segs, clip.duration_s())) o.fail(fmt::format("sequence {} does not tile", trial));
    const double acc = chord_accuracy(segs, truth, 2.0, 0.1);
    worst = std::min(worst, acc);
    if (acc < 0.9) o.fail(fmt::format("sequence {} accuracy {:.3f}", trial, acc));
  }
  if (o.pass) o.detail = fmt::format("20 sequences, worst accuracy {:.3f}", worst);
  return o;
}

std::vector<Section> sections_of(const AudioClip& clip) {
  const auto spec = stft(clip);
  const auto env = onset_strength(spec);
  return segment_structure(chromagram(spec), mfcc(spec), track_beats(env, estimate_tempo(env)), clip.duration_s());
}

Outcome structure() {
  Outcome o;
  int hits = 0;
  for (std::uint32_t seed = 100; seed < 110; ++seed) {
    const auto t = two_part_track(seed);
    const auto secs = sections_of(t.clip);
    for (std::size_t i = 1; i < secs.size(); ++i)
      if (std::abs(secs[i].start - t.change_s) <= 1.0) {
        ++hits;
        break;
      }
  }
  if (hits < 8) o.fail(fmt::format("{}/10 boundaries within 1 s", hits));
  const auto aba = sections_of(aba_track(3));
  if (aba.size() < 2 || aba.front().cluster != aba.back().cluster) o.fail("ABA outer letters differ");
  if (o.pass) o.detail = fmt::format("{}/10 boundaries within 1 s, ABA outer letters match", hits);
  return o;
}

TimbralProfile profile(const std::vector<double>& x) {
  const auto clip = AudioClip::mono(x, kRate);
  return timbral_descriptors(clip, stft(clip));
}

Outcome timbre() {
  Outcome o;
  for (std::uint32_t seed = 0; seed < 10; ++seed) {
    std::mt19937 rng(seed);
    const auto noise = white_noise(rng, 3.0);
    const auto hi = profile(highpass(noise, 4000.0));
    const auto lo = profile(lowpass(noise, 300.0));
    if (!(hi.brightness > lo.brightness)) o.fail(fmt::format("seed {}: brightness ordering", seed));
    if (!(lo.depth > hi.depth)) o.fail(fmt::format("seed {}: depth ordering", seed));

    // Tones get a random level and a faint noise floor per seed.
    std::uniform_real_distribution<double> amp(0.1, 0.8);
    auto low = sine(50.0, 3.0, kRate, amp(rng));
    auto high = sine(5000.0, 3.0, kRate, amp(rng));
    mix_into(low, white_noise(rng, 3.0, kRate, 0.001));
    mix_into(high, white_noise(rng, 3.0, kRate, 0.001));
    const auto pl = profile(low), ph = profile(high);
    if (!(pl.boominess > ph.boominess)) o.fail(fmt::format("seed {}: boominess ordering", seed));
    if (!(ph.sharpness > pl.sharpness)) o.fail(fmt::format("seed {}: sharpness ordering", seed));
  }
  if (o.pass) o.detail = "4 orderings x 10 seeds";
  return o;
}

Outcome chord_stats_oracle() {
  Outcome o;
  std::mt19937 rng(777);
  for (int i = 0; i < 200; ++i) {
    const auto segs = random_segments(rng);
    const auto diff = compare_with_oracle(chord_statistics(segs), oracle_chord_stats(segs));
    if (!diff.empty()) o.fail(fmt::format("sequence {}: {}", i, diff));
  }
  if (o.pass) o.detail = "200/200 sequences match";
  return o;
}

Outcome report_determinism() {
  Outcome o;
  const std::vector<std::pair<std::string, AudioClip>> clips = {
      {"pop mix", pop_mix(11, 20.0)},
      {"two-part", two_part_track(12).clip},
      {"cadence", cadence(2, Mode::kMajor, 3.0)},
      {"click track", click_track(128.0, 12.0).clip},
      {"aba", aba_track(13, 10.0)},
  };
  for (const auto& [name, clip] : clips) {
    AnalyzeOptions opts;
    opts.source_hash = name;
    const auto first = analyze_track(clip, opts);
    const auto second = analyze_track(clip, opts);
    std::array<MusicReport, 3> r;
    for (int d = 1; d <= 3; ++d) {
      r[d - 1] = build_report(first, d);
      if (r[d - 1].dump() != build_report(second, d).dump()) o.fail(fmt::format("{} depth {} not byte-identical", name, d));
    }
    if (!missing_paths(r[0], r[1]).empty()) o.fail(fmt::format("{}: depth 1 fields missing at depth 2", name));
    if (!missing_paths(r[1], r[2]).empty()) o.fail(fmt::format("{}: depth 2 fields missing at depth 3", name));
    if (report_paths(r[0]) == report_paths(r[2])) o.fail(fmt::format("{}: depth 3 adds nothing", name));
  }
  if (o.pass) o.detail = "5 clips x 3 depths identical, 1 < 2 < 3";
  return o;
}

Outcome got_engine() {
  Outcome o;
  const std::string path = TRACKMATE_DATA_DIR "/graphs/music_feedback.json";
  nlohmann::json raw;
  std::ifstream(path) >> raw;
  auto graph = llm::ThoughtGraph::from_file(path);
  if (graph.nodes().size() != 11) o.fail(fmt::format("{} nodes", graph.nodes().size()));

  const std::map<std::string, std::pair<std::string, llm::Transformation>> expected = {
      {"N1", {"T1", llm::Transformation::kGenerate}},   {"N2", {"T1", llm::Transformation::kGenerate}},
      {"N3", {"T2", llm::Transformation::kAggregate}},  {"N4", {"T3", llm::Transformation::kGenerate}},
      {"N5", {"T3", llm::Transformation::kGenerate}},   {"N6", {"T4a", llm::Transformation::kRefine}},
      {"N7", {"T4a", llm::Transformation::kRefine}},    {"N8", {"T4b", llm::Transformation::kAggregate}},
      {"N9", {"T4b", llm::Transformation::kAggregate}}, {"N10", {"T5", llm::Transformation::kRefine}},
      {"N11", {"T5", llm::Transformation::kRefine}}};
  for (const auto& n : graph.nodes()) {
    const auto it = expected.find(n.id);
    if (it == expected.end() || it->second.first != n.stage || it->second.second != n.kind)
      o.fail("node " + n.id + " has the wrong stage or transformation");
  }

  // Call count from the raw file: k per generate node, one per other node.
  std::size_t sigma = 0;
  for (const auto& n : raw["nodes"])
    sigma += n["transformation"] == "generate" ? n.value("k", 1) : 1;

  llm::MockBackend mock({{"", "thought", false}});
  llm::execute_got(graph, "context", mock, {.parallel = false});
  const auto calls = mock.calls();
  if (calls.size() != sigma) o.fail(fmt::format("{} calls, formula gives {}", calls.size(), sigma));

  // Position of each node's first call in the log.
  std::map<std::string, std::size_t> first_call, count;
  for (std::size_t i = 0; i < calls.size(); ++i) {
    const auto& text = calls[i].messages.back().content;
    const auto close = text.find(']');
    if (text.rfind("[node ", 0) != 0 || close == std::string::npos) {
      o.fail("call without a node tag");
      continue;
    }
    const auto id = text.substr(6, close - 6);
    if (!first_call.count(id)) first_call[id] = i;
    ++count[id];
  }
  std::map<std::string, std::size_t> last_call;
  for (std::size_t i = 0; i < calls.size(); ++i) {
    const auto& text = calls[i].messages.back().content;
    const auto close = text.find(']');
    if (close != std::string::npos && text.rfind("[node ", 0) == 0) last_call[text.substr(6, close - 6)] = i;
  }
  for (const auto& n : raw["nodes"]) {
    const auto id = n["id"].get<std::string>();
    const std::size_t want = n["transformation"] == "generate" ? n.value("k", 1) : 1;
    if (count[id] != want) o.fail(fmt::format("{} called {} times", id, count[id]));
  }
  for (const auto& e : raw["edges"]) {
    const auto from = e[0].get<std::string>(), to = e[1].get<std::string>();
    if (!(last_call[from] < first_call[to])) o.fail(fmt::format("{} ran before its parent {} finished", to, from));
  }
  for (const auto& n : graph.nodes())
    if (!n.executed) o.fail(n.id + " not marked executed");

  // Diamond: the aggregate sees both refined branches, each refine sees the root.
  auto diamond = llm::ThoughtGraph::from_json(nlohmann::json::parse(R"({
    "nodes": [
      {"id": "G", "transformation": "generate", "k": 1, "prompt": "root"},
      {"id": "R1", "transformation": "refine", "prompt": "left"},
      {"id": "R2", "transformation": "refine", "prompt": "right"},
      {"id": "A", "transformation": "aggregate", "prompt": "join"}
    ],
    "edges": [["G", "R1"], ["G", "R2"], ["R1", "A"], ["R2", "A"]]})"));
  llm::MockBackend dm({{"[node G]", "ROOT-OUT", false},
                       {"[node R1]", "LEFT-OUT", false},
                       {"[node R2]", "RIGHT-OUT", false},
                       {"[node A]", "JOINED", false}});
  llm::execute_got(diamond, "context", dm);
  const auto dcalls = dm.calls();
  if (dcalls.size() != 4) o.fail(fmt::format("diamond made {} calls", dcalls.size()));
  for (const auto& c : dcalls) {
    const auto& text = c.messages.back().content;
    if (text.rfind("[node R", 0) == 0 && text.find("ROOT-OUT") == std::string::npos) o.fail("refine prompt lacks root output");
    if (text.rfind("[node A]", 0) == 0 &&
        (text.find("LEFT-OUT") == std::string::npos || text.find("RIGHT-OUT") == std::string::npos ||
         text.find("ROOT-OUT") != std::string::npos))
      o.fail("aggregate prompt does not carry exactly both branch outputs");
  }
  if (llm::final_output(diamond) != "JOINED") o.fail("diamond output is not the sink result");
  if (o.pass) o.detail = fmt::format("11 nodes, {} calls = formula, order respects {} edges, diamond ok", sigma, raw["edges"].size());
  return o;
}

Outcome refinement() {
  Outcome o;
  const auto bundle = analyze_track(pop_mix(21, 12.0));
  for (int pick = 1; pick <= 3; ++pick) {
    llm::MockBackend mock({{"Compare the three interpretations", fmt::format("DEPTH: {}\nMost useful.", pick), false},
                           {"", "an interpretation", false}});
    const auto res = llm::refine_report(bundle, mock);
    if (mock.call_count() != 4) o.fail(fmt::format("{} calls", mock.call_count()));
    if (res.depth != pick || res.defaulted || res.report["depth"] != pick) o.fail(fmt::format("choice {} not honoured", pick));
  }
  llm::MockBackend gib({{"Compare the three interpretations", "they are all lovely", false}, {"", "x", false}});
  const auto res = llm::refine_report(bundle, gib);
  if (gib.call_count() != 4) o.fail("gibberish run made the wrong number of calls");
  if (res.depth != 3 || !res.defaulted) o.fail("gibberish reply did not fall back to depth 3 with the flag");
  if (o.pass) o.detail = "4 calls each, choices 1-3 honoured, gibberish -> 3 (flagged)";
  return o;
}

nlohmann::ordered_json body_of(const httplib::Result& r) { return nlohmann::ordered_json::parse(r->body); }

Outcome service_round_trip() {
  Outcome o;
  const auto store = fs::temp_directory_path() / fmt::format("trackmate-acceptance-{}", ::getpid());
  fs::remove_all(store);
  service::ServiceConfig cfg;
  cfg.store_dir = store.string();
  cfg.port = 0;
  cfg.mock_fixture = TRACKMATE_DATA_DIR "/fixtures/mock_backend.json";
  const auto wav = encode_wav(pop_mix(31, 12.0));
  const std::string bytes(wav.begin(), wav.end());

  std::string track_id, session_id, track_get, report_get, session_get;
  {
    service::FeedbackService svc(cfg, service::make_backend(cfg));
    httplib::Client c("127.0.0.1", svc.start_background());
    c.set_read_timeout(std::chrono::seconds(120));
    auto up = c.Post("/tracks", httplib::MultipartFormDataItems{{"file", bytes, "loop.wav", "audio/wav"}});
    if (!up || up->status != 201) {
      o.fail(fmt::format("upload answered {}", up ? up->status : -1));
      fs::remove_all(store);
      return o;
    }
    const auto rec = body_of(up);
    track_id = rec["track_id"].get<std::string>();
    if (!rec["report"].is_object() || !rec["report"].contains("harmony")) o.fail("upload response lacks the report");

    auto created = c.Post("/sessions", nlohmann::json{{"track_id", track_id}}.dump(), "application/json");
    if (!created || created->status != 201) {
      o.fail(fmt::format("session create answered {}", created ? created->status : -1));
      fs::remove_all(store);
      return o;
    }
    const auto s = body_of(created);
    session_id = s["session_id"].get<std::string>();
    const auto scores = s["scores"].dump();
    for (auto name : llm::kRubricNames)
      if (scores.find(name) == std::string::npos) o.fail("scores lack " + std::string(name));
    const auto opening = s["opening_message"].get<std::string>();
    if (opening.empty() || opening.back() != '?') o.fail("opening message does not end with a question");

    const auto before = body_of(c.Get("/sessions/" + session_id))["session"]["history"].size();
    auto msg = c.Post("/sessions/" + session_id + "/messages", nlohmann::json{{"text", "What about the bass?"}}.dump(),
                      "application/json");
    if (!msg || msg->status != 200) o.fail("follow-up failed");
    const auto after = body_of(c.Get("/sessions/" + session_id))["session"]["history"].size();
    if (after != before + 2) o.fail(fmt::format("history went {} -> {}", before, after));

    track_get = c.Get("/tracks/" + track_id)->body;
    report_get = c.Get("/tracks/" + track_id + "/report")->body;
    session_get = c.Get("/sessions/" + session_id)->body;
  }
  {
    service::FeedbackService svc(cfg, service::make_backend(cfg));
    httplib::Client c("127.0.0.1", svc.start_background());
    if (c.Get("/tracks/" + track_id)->body != track_get || c.Get("/tracks/" + track_id + "/report")->body != report_get ||
        c.Get("/sessions/" + session_id)->body != session_get)
      o.fail("GETs differ after restart");
  }
  fs::remove_all(store);
  if (o.pass) o.detail = "201 upload, five categories, closing question, +2 history, identical after restart";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"tempo-beat", tempo_beats},
      {"key", keys},
      {"chords", chords},
      {"structure", structure},
      {"timbre-orderings", timbre},
      {"chordstats-oracle", chord_stats_oracle},
      {"report-determinism-depth", report_determinism},
      {"got-engine", got_engine},
      {"refinement-loop", refinement},
      {"service-round-trip", service_round_trip},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.fail(std::string("threw: ") + e.what());
    }
    failures += !o.pass;
    fmt::print("{} {} ({})\n", o.pass ? "PASS" : "FAIL", name, o.detail);
    std::fflush(stdout);
  }
  fmt::print("{}/{} criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
