#include <gtest/gtest.h>

#include "trackmate/semantics.hpp"

using namespace trackmate;

namespace {

Section section(double start, double end, Emotion emotion, std::vector<Instrument> inst) {
  Section s;
  s.start = start;
  s.end = end;
  s.emotion.label = emotion;
  for (auto i : inst) s.instruments.push_back({i, 0.8});
  return s;
}

SemanticsFeatures features(double bpm, Mode mode, std::vector<Section> sections) {
  SemanticsFeatures f;
  f.tempo_bpm = bpm;
  f.key = KeyEstimate{0, mode, 0.8};
  f.sections = std::move(sections);
  f.timbre = {50, 50, 50, 50, 50, 50, 50};
  return f;
}

// Plugin that answers a fixed document regardless of input.
class FixedPlugin : public SemanticsPlugin {
 public:
  explicit FixedPlugin(nlohmann::json reply) : reply_(std::move(reply)) {}
  nlohmann::json classify(const nlohmann::json& request) override {
    last_request = request;
    return reply_;
  }
  nlohmann::json last_request;

 private:
  nlohmann::json reply_;
};

}  // namespace

TEST(Vocabulary, FixedSets) {
  EXPECT_TRUE(is_genre("hip-hop"));
  EXPECT_TRUE(is_genre("jazz"));
  EXPECT_FALSE(is_genre("metal"));
  EXPECT_TRUE(is_theme("melancholy"));
  EXPECT_FALSE(is_theme("sad"));
}

TEST(Coverage, DurationWeighted) {
  const std::vector<Section> s = {section(0, 30, Emotion::kCalm, {Instrument::kDrums}),
                                  section(30, 40, Emotion::kCalm, {})};
  EXPECT_DOUBLE_EQ(instrument_coverage(s, Instrument::kDrums), 0.75);
  EXPECT_DOUBLE_EQ(instrument_coverage(s, Instrument::kBass), 0.0);
}

TEST(Heuristic, PopLoop) {
  const auto f = features(120, Mode::kMajor,
                          {section(0, 30, Emotion::kHappy, {Instrument::kDrums, Instrument::kHarmonic})});
  const auto s = heuristic_semantics(f);
  EXPECT_EQ(s.genre, "pop");
  EXPECT_EQ(s.theme, "party");
  EXPECT_EQ(s.source, SemanticsSource::kHeuristic);
}

TEST(Heuristic, HipHopNeedsDrumsBassAndTempo) {
  const auto f = features(90, Mode::kMinor,
                          {section(0, 30, Emotion::kTense, {Instrument::kDrums, Instrument::kBass})});
  const auto s = heuristic_semantics(f);
  EXPECT_EQ(s.genre, "hip-hop");
  EXPECT_EQ(s.theme, "energy");
}

TEST(Heuristic, QuietHarmonicMaterial) {
  auto f = features(70, Mode::kMinor, {section(0, 30, Emotion::kSad, {Instrument::kHarmonic})});
  f.timbre.warmth = 70;
  EXPECT_EQ(heuristic_semantics(f).genre, "folk");
  EXPECT_EQ(heuristic_semantics(f).theme, "melancholy");
  f.timbre.warmth = 40;
  f.timbre.brightness = 30;
  EXPECT_EQ(heuristic_semantics(f).genre, "classical");
}

TEST(Heuristic, NoSectionsMeansOther) {
  SemanticsFeatures f;
  const auto s = heuristic_semantics(f);
  EXPECT_EQ(s.genre, "other");
  EXPECT_EQ(s.theme, "other");
}

TEST(Plugin, ValidReplyWins) {
  FixedPlugin plugin({{"genre", "jazz"}, {"theme", "love"}});
  const auto f = features(100, Mode::kMajor, {section(0, 10, Emotion::kHappy, {Instrument::kHarmonic})});
  const auto s = classify_track_semantics(f, &plugin);
  EXPECT_EQ(s.genre, "jazz");
  EXPECT_EQ(s.theme, "love");
  EXPECT_EQ(s.source, SemanticsSource::kPlugin);
  EXPECT_FALSE(s.warning);
  EXPECT_DOUBLE_EQ(plugin.last_request.at("tempo_bpm").get<double>(), 100.0);
  EXPECT_EQ(plugin.last_request.at("sections").size(), 1u);
}

TEST(Plugin, OutOfVocabularyFallsBackWithWarning) {
  FixedPlugin plugin({{"genre", "polka"}, {"theme", "love"}});
  const auto f = features(100, Mode::kMajor, {section(0, 10, Emotion::kHappy, {Instrument::kHarmonic})});
  const auto s = classify_track_semantics(f, &plugin);
  EXPECT_EQ(s.source, SemanticsSource::kHeuristic);
  ASSERT_TRUE(s.warning);
  EXPECT_EQ(s.genre, heuristic_semantics(f).genre);
}

TEST(Subprocess, EchoesThroughTheShell) {
  const auto r = run_process("tr a-z A-Z", "hello", std::chrono::seconds(5));
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_FALSE(r.timed_out);
  EXPECT_EQ(r.out, "HELLO");
}

TEST(Subprocess, TimeoutKillsTheChild) {
  const auto start = std::chrono::steady_clock::now();
  const auto r = run_process("sleep 5", "", std::chrono::milliseconds(200));
  EXPECT_TRUE(r.timed_out);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(3));
}

TEST(SubprocessPlugin, ClassifiesAndReportsFailures) {
  const auto f = features(120, Mode::kMajor, {section(0, 10, Emotion::kCalm, {})});
  SubprocessPlugin good(R"(cat >/dev/null; echo '{"genre": "electronic", "theme": "chill"}')");
  const auto s = classify_track_semantics(f, &good);
  EXPECT_EQ(s.genre, "electronic");
  EXPECT_EQ(s.source, SemanticsSource::kPlugin);

  SubprocessPlugin failing("cat >/dev/null; exit 3");
  EXPECT_THROW(failing.classify(plugin_request(f)), PluginError);
  const auto fb = classify_track_semantics(f, &failing);
  EXPECT_EQ(fb.source, SemanticsSource::kHeuristic);
  EXPECT_TRUE(fb.warning);

  SubprocessPlugin garbage("cat >/dev/null; echo not json");
  EXPECT_THROW(garbage.classify(plugin_request(f)), PluginError);

  SubprocessPlugin slow("sleep 5", std::chrono::milliseconds(200));
  EXPECT_THROW(slow.classify(plugin_request(f)), PluginError);
}
