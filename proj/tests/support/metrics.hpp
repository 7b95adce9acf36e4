#pragma once

// Scoring helpers shared by the unit and acceptance suites. They are written
// against plain vectors so they do not reuse any analyzer code.

#include <cmath>
#include <cstddef>
#include <vector>

#include "trackmate/harmony.hpp"

namespace trackmate::testing {

/// Beat F-measure with one-to-one greedy matching inside +-tolerance.
inline double beat_f_measure(const std::vector<double>& estimated, const std::vector<double>& reference,
                             double tolerance = 0.07) {
  if (estimated.empty() || reference.empty()) return 0.0;
  std::vector<bool> used(reference.size(), false);
  std::size_t hits = 0;
  for (double e : estimated) {
    std::size_t best = reference.size();
    double best_err = tolerance;
    for (std::size_t j = 0; j < reference.size(); ++j) {
      const double err = std::abs(e - reference[j]);
      if (!used[j] && err <= best_err) {
        best = j;
        best_err = err;
      }
    }
    if (best < reference.size()) {
      used[best] = true;
      ++hits;
    }
  }
  const double p = static_cast<double>(hits) / static_cast<double>(estimated.size());
  const double r = static_cast<double>(hits) / static_cast<double>(reference.size());
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

/// Time-weighted label accuracy against a reference of equal-length chords,
/// ignoring `guard_s` on either side of every reference boundary. Evaluated on
/// a 1 ms grid.
inline double chord_accuracy(const std::vector<ChordSegment>& estimated, const std::vector<ChordLabel>& reference,
                             double seconds_each, double guard_s = 0.1) {
  const double total = seconds_each * static_cast<double>(reference.size());
  double scored = 0.0, correct = 0.0;
  std::size_t seg = 0;
  for (double t = 0.0005; t < total; t += 0.001) {
    const double phase = std::fmod(t, seconds_each);
    if (phase < guard_s || seconds_each - phase < guard_s) continue;
    while (seg + 1 < estimated.size() && estimated[seg].end <= t) ++seg;
    scored += 1.0;
    const auto truth = reference[static_cast<std::size_t>(t / seconds_each)];
    if (!estimated.empty() && estimated[seg].start <= t && t < estimated[seg].end && estimated[seg].label == truth) {
      correct += 1.0;
    }
  }
  return scored > 0 ? correct / scored : 0.0;
}

/// True when segments start at 0, end at `duration`, and are contiguous and non-empty.
inline bool tiles(const std::vector<ChordSegment>& segs, double duration, double eps = 1e-9) {
  if (segs.empty()) return false;
  if (std::abs(segs.front().start) > eps || std::abs(segs.back().end - duration) > eps) return false;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (!(segs[i].end > segs[i].start)) return false;
    if (i > 0 && std::abs(segs[i].start - segs[i - 1].end) > eps) return false;
  }
  return true;
}

}  // namespace trackmate::testing
