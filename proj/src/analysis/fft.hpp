#pragma once

#include <complex>
#include <span>
#include <vector>

namespace trackmate::detail {

/// Forward real-to-complex FFT of a fixed size. Plans are created once per
/// size under a lock; execution is thread-safe on caller-owned buffers.
class RealFft {
 public:
  explicit RealFft(int size);

  int size() const { return size_; }
  int bins() const { return size_ / 2 + 1; }

  /// `in` must hold size() samples; `out` must hold bins() values.
  void forward(std::span<double> in, std::span<std::complex<double>> out) const;

 private:
  int size_;
  void* plan_;
};

/// Magnitudes |X_k| of the real FFT of `frame` (length n), k = 0..n/2.
std::vector<double> magnitude_spectrum(std::span<const double> frame);

}  // namespace trackmate::detail
