// OpenMP kernels against their serial references. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "synth.hpp"
#include "trackmate/harmony.hpp"
#include "trackmate/rhythm.hpp"
#include "trackmate/spectral.hpp"
#include "trackmate/structure.hpp"

using namespace trackmate;
using namespace trackmate::testing;

namespace {

const AudioClip& mix() {
  static const AudioClip clip = pop_mix(1, 60.0);
  return clip;
}

const AudioClip& stereo_44k() {
  static const AudioClip clip = [] {
    std::mt19937 rng(3);
    return AudioClip({white_noise(rng, 30.0, 44100), white_noise(rng, 30.0, 44100)}, 44100);
  }();
  return clip;
}

const Spectrogram& spec() {
  static const Spectrogram s = stft(mix());
  return s;
}

const Chromagram& chroma() {
  static const Chromagram c = chromagram(spec());
  return c;
}

const FrameMatrix& beat_features() {
  static const FrameMatrix f = [] {
    const auto env = onset_strength(spec());
    const auto beats = track_beats(env, estimate_tempo(env));
    return beat_sync_features(chroma(), mfcc(spec()), beats, mix().duration_s());
  }();
  return f;
}

template <auto Fn>
void run_stft(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(Fn(mix(), kWindowSize, kHopSize));
}

template <auto Fn>
void run_resample(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(Fn(stereo_44k(), kAnalysisRate));
}

template <auto Fn>
void run_emissions(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(Fn(chroma(), ChordConfig{}));
}

template <auto Fn>
void run_ssm(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(Fn(beat_features(), StructureConfig{}));
}

template <auto Fn>
void run_hpss(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(Fn(spec(), 17));
}

}  // namespace

BENCHMARK(run_stft<stft>)->Name("stft/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(run_stft<stft_serial>)->Name("stft/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(run_resample<resample_mono>)->Name("resample/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(run_resample<resample_mono_serial>)->Name("resample/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(run_emissions<chord_emissions>)->Name("chord_emissions/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(run_emissions<chord_emissions_serial>)->Name("chord_emissions/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(run_ssm<self_similarity>)->Name("self_similarity/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(run_ssm<self_similarity_serial>)->Name("self_similarity/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(run_hpss<hpss>)->Name("hpss/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(run_hpss<hpss_serial>)->Name("hpss/serial")->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  // Build the fixtures up front so no benchmark pays for them.
  stereo_44k();
  beat_features();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
