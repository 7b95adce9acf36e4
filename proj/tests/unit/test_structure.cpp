#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "synth.hpp"
#include "trackmate/harmony.hpp"
#include "trackmate/rhythm.hpp"
#include "trackmate/structure.hpp"

using namespace trackmate;
using namespace trackmate::testing;

namespace {

struct Features {
  Chromagram chroma;
  MfccMatrix mfcc;
  BeatGrid beats;
  double duration = 0;
};

Features features(const AudioClip& clip) {
  const auto spec = stft(clip);
  const auto env = onset_strength(spec);
  return {chromagram(spec), mfcc(spec), track_beats(env, estimate_tempo(env)), clip.duration_s()};
}

std::vector<Section> segment(const AudioClip& clip) {
  const auto f = features(clip);
  return segment_structure(f.chroma, f.mfcc, f.beats, f.duration);
}

}  // namespace

TEST(Emotion, QuadrantsWithTiesTowardPositive) {
  EXPECT_EQ(emotion_quadrant(0.5, 0.5), Emotion::kHappy);
  EXPECT_EQ(emotion_quadrant(-0.5, 0.5), Emotion::kTense);
  EXPECT_EQ(emotion_quadrant(-0.5, -0.5), Emotion::kSad);
  EXPECT_EQ(emotion_quadrant(0.5, -0.5), Emotion::kCalm);
  EXPECT_EQ(emotion_quadrant(0.0, 0.0), Emotion::kHappy);
}

TEST(Emotion, FastLoudMajorIsHappySlowQuietMinorIsSad) {
  const auto happy = classify_emotion({150.0, Mode::kMajor, 0.3, 80.0});
  const auto sad = classify_emotion({65.0, Mode::kMinor, 0.02, 20.0});
  EXPECT_EQ(happy.label, Emotion::kHappy);
  EXPECT_EQ(sad.label, Emotion::kSad);
  for (const auto& e : {happy, sad}) {
    EXPECT_GE(e.valence, -1.0);
    EXPECT_LE(e.valence, 1.0);
    EXPECT_GE(e.arousal, -1.0);
    EXPECT_LE(e.arousal, 1.0);
  }
}

TEST(SelfSimilarity, SymmetricUnitDiagonalParallelMatchesSerial) {
  const auto f = features(pop_mix(3, 12.0));
  const auto feats = beat_sync_features(f.chroma, f.mfcc, f.beats, f.duration);
  const auto s = self_similarity(feats);
  EXPECT_EQ(s, self_similarity_serial(feats));
  for (std::size_t i = 0; i < s.rows(); ++i) {
    EXPECT_NEAR(s(i, i), 1.0, 1e-9);
    for (std::size_t j = 0; j < s.cols(); ++j) {
      ASSERT_NEAR(s(i, j), s(j, i), 1e-12);
      ASSERT_GE(s(i, j), -1.0 - 1e-12);
      ASSERT_LE(s(i, j), 1.0 + 1e-12);
    }
  }
}

TEST(Hpss, ParallelMatchesSerialAndMediansStayInRange) {
  const auto spec = stft(pop_mix(5, 4.0));
  const auto a = hpss(spec);
  const auto b = hpss_serial(spec);
  EXPECT_EQ(a.harmonic, b.harmonic);
  EXPECT_EQ(a.percussive, b.percussive);
  const auto& mags = spec.magnitudes.data();
  const double peak = *std::max_element(mags.begin(), mags.end());
  for (std::size_t i = 0; i < a.harmonic.data().size(); ++i) {
    const double h = a.harmonic.data()[i], p = a.percussive.data()[i];
    ASSERT_GE(h, 0.0);
    ASSERT_GE(p, 0.0);
    ASSERT_LE(h, peak);
    ASSERT_LE(p, peak);
  }
}

TEST(Hpss, SteadyToneIsHarmonicClickIsPercussive) {
  const auto tone = instrument_ratios(AudioClip::mono(sine(330.0, 3.0), kRate));
  EXPECT_GT(tone.harmonic, 0.8);
  const auto clicks = instrument_ratios(click_track(120, 3).clip);
  EXPECT_GT(clicks.percussive, 0.5);
}

TEST(Structure, TwoPartBoundaryFound) {
  int hits = 0;
  for (std::uint32_t seed = 0; seed < 4; ++seed) {
    const auto t = two_part_track(seed);
    const auto secs = segment(t.clip);
    for (std::size_t i = 1; i < secs.size(); ++i)
      if (std::abs(secs[i].start - t.change_s) <= 1.0) {
        ++hits;
        break;
      }
  }
  EXPECT_GE(hits, 3);
}

TEST(Structure, SectionsTileTheTrack) {
  const auto clip = two_part_track(7).clip;
  const auto secs = segment(clip);
  ASSERT_FALSE(secs.empty());
  EXPECT_DOUBLE_EQ(secs.front().start, 0.0);
  EXPECT_DOUBLE_EQ(secs.back().end, clip.duration_s());
  for (std::size_t i = 1; i < secs.size(); ++i) EXPECT_DOUBLE_EQ(secs[i].start, secs[i - 1].end);
  EXPECT_EQ(secs.front().cluster, 'A');
}

TEST(Structure, AbaOuterPartsShareALetter) {
  const auto secs = segment(aba_track(2));
  ASSERT_GE(secs.size(), 3u);
  EXPECT_EQ(secs.front().cluster, secs.back().cluster);
  EXPECT_NE(secs.front().cluster, secs[secs.size() / 2].cluster);
}

TEST(Structure, TooFewBeatsThrows) {
  const auto f = features(click_track(120, 15).clip);
  BeatGrid few;
  few.beat_times_s = {0.5, 1.0, 1.5};
  EXPECT_THROW(segment_structure(f.chroma, f.mfcc, few, f.duration), StructureTooShort);
}

TEST(Functions, RepeatedLoudSectionIsChorus) {
  std::vector<Section> s(4);
  const char letters[] = {'A', 'B', 'A', 'B'};
  for (int i = 0; i < 4; ++i) {
    s[i].start = 10.0 * i;
    s[i].end = 10.0 * (i + 1);
    s[i].cluster = letters[i];
  }
  const auto out = label_functions(s, {0.05, 0.2, 0.05, 0.2});
  EXPECT_EQ(out[1].function, SectionFunction::kChorus);
  EXPECT_EQ(out[3].function, SectionFunction::kChorus);
  EXPECT_EQ(out[2].function, SectionFunction::kVerse);
  EXPECT_EQ(out[0].function, SectionFunction::kIntro);  // quiet opening
}

TEST(Functions, SingletonMidTrackClusterIsBridge) {
  std::vector<Section> s(5);
  const char letters[] = {'A', 'B', 'C', 'A', 'B'};
  for (int i = 0; i < 5; ++i) {
    s[i].start = 8.0 * i;
    s[i].end = 8.0 * (i + 1);
    s[i].cluster = letters[i];
  }
  const auto out = label_functions(s, {0.1, 0.1, 0.1, 0.1, 0.1});
  EXPECT_EQ(out[2].function, SectionFunction::kBridge);
  EXPECT_NE(out[0].function, SectionFunction::kIntro);
}

TEST(Instruments, DrumsDetectedAndMonotoneUnderAddedPercussion) {
  std::mt19937 rng(3);
  const auto kit = drums(rng, 120, 4.0);
  const auto tags = detect_instruments(AudioClip::mono(kit, kRate));
  auto has = [](const std::vector<InstrumentTag>& t, Instrument i) {
    return std::any_of(t.begin(), t.end(), [i](const InstrumentTag& x) { return x.name == i; });
  };
  EXPECT_TRUE(has(tags, Instrument::kDrums));
  EXPECT_FALSE(has(detect_instruments(AudioClip::mono(sine(440.0, 4.0), kRate)), Instrument::kDrums));

  auto mix = pop_mix(8, 4.0);
  std::vector<double> louder(mix.samples().begin(), mix.samples().end());
  mix_into(louder, kit, 0.5);
  if (has(detect_instruments(mix), Instrument::kDrums)) {
    EXPECT_TRUE(has(detect_instruments(AudioClip::mono(louder, kRate)), Instrument::kDrums));
  }
}

TEST(Instruments, GainInvariant) {
  const auto mix = pop_mix(2, 4.0);
  std::vector<double> quiet(mix.samples().begin(), mix.samples().end());
  for (auto& x : quiet) x *= 0.1;
  const auto a = instrument_ratios(mix);
  const auto b = instrument_ratios(AudioClip::mono(quiet, kRate));
  EXPECT_NEAR(a.percussive, b.percussive, 1e-6);
  EXPECT_NEAR(a.harmonic, b.harmonic, 1e-6);
  EXPECT_NEAR(a.harmonic_bass, b.harmonic_bass, 1e-6);
}
