#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

namespace trackmate::detail {

namespace {

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// Plans live for the whole process; FFTW planning is not thread-safe.
fftw_plan cached_plan(int size) {
  static std::map<int, fftw_plan> plans;
  std::lock_guard lock(plan_mutex());
  if (auto it = plans.find(size); it != plans.end()) return it->second;
  std::vector<double> in(static_cast<std::size_t>(size));
  std::vector<std::complex<double>> out(static_cast<std::size_t>(size / 2 + 1));
  fftw_plan plan = fftw_plan_dft_r2c_1d(size, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                        FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (plan == nullptr) throw std::runtime_error("FFTW planning failed");
  plans.emplace(size, plan);
  return plan;
}

}  // namespace

RealFft::RealFft(int size) : size_(size), plan_(nullptr) {
  if (size < 1) throw std::invalid_argument("FFT size must be positive");
  plan_ = cached_plan(size);
}

void RealFft::forward(std::span<double> in, std::span<std::complex<double>> out) const {
  if (in.size() != static_cast<std::size_t>(size_) || out.size() != static_cast<std::size_t>(bins())) {
    throw std::invalid_argument("FFT buffer size mismatch");
  }
  fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_), in.data(), reinterpret_cast<fftw_complex*>(out.data()));
}

std::vector<double> magnitude_spectrum(std::span<const double> frame) {
  RealFft fft(static_cast<int>(frame.size()));
  std::vector<double> buf(frame.begin(), frame.end());
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(fft.bins()));
  fft.forward(buf, spec);
  std::vector<double> mags(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) mags[k] = std::abs(spec[k]);
  return mags;
}

}  // namespace trackmate::detail
