#include "trackmate/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

namespace trackmate {

AudioClip::AudioClip(std::vector<std::vector<double>> channels, int sample_rate)
    : channels_(std::move(channels)), sample_rate_(sample_rate) {
  if (sample_rate_ <= 0) throw std::invalid_argument("sample rate must be positive");
  if (channels_.empty()) throw std::invalid_argument("clip needs at least one channel");
  const auto n = channels_.front().size();
  for (const auto& c : channels_) {
    if (c.size() != n) throw std::invalid_argument("channel lengths differ");
  }
}

AudioClip AudioClip::mono(std::vector<double> samples, int sample_rate) {
  std::vector<std::vector<double>> ch;
  ch.push_back(std::move(samples));
  return AudioClip(std::move(ch), sample_rate);
}

double AudioClip::peak() const {
  double p = 0.0;
  for (const auto& c : channels_)
    for (double s : c) p = std::max(p, std::abs(s));
  return p;
}

AudioClip AudioClip::slice(double begin_s, double end_s) const {
  const auto n = frame_count();
  auto clampi = [&](double t) {
    const double idx = std::round(t * sample_rate_);
    return static_cast<std::size_t>(std::clamp(idx, 0.0, static_cast<double>(n)));
  };
  const std::size_t b = clampi(begin_s);
  const std::size_t e = std::max(b, clampi(end_s));
  std::vector<std::vector<double>> out;
  for (const auto& c : channels_) out.emplace_back(c.begin() + b, c.begin() + e);
  return AudioClip(std::move(out), sample_rate_);
}

double rms(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

struct FormatChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

double decode_sample(const std::uint8_t* p, const FormatChunk& fmt) {
  if (fmt.format == kFormatFloat) {
    const float v = std::bit_cast<float>(read_u32(p));
    if (!std::isfinite(v)) return 0.0;
    return std::clamp(static_cast<double>(v), -1.0, 1.0);
  }
  switch (fmt.bits) {
    case 16:
      return static_cast<std::int16_t>(read_u16(p)) / 32768.0;
    case 24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v |= ~0xFFFFFF;
      return v / 8388608.0;
    }
    case 32:
      return static_cast<std::int32_t>(read_u32(p)) / 2147483648.0;
    default:
      return 0.0;
  }
}

}  // namespace

AudioClip decode_audio(std::span<const std::uint8_t> bytes, std::optional<std::string_view> hint) {
  if (hint && !hint->empty()) {
    std::string tag(*hint);
    std::transform(tag.begin(), tag.end(), tag.begin(), [](unsigned char c) { return std::tolower(c); });
    if (tag != "wav" && tag != "wave" && tag != "audio/wav" && tag != "audio/x-wav" &&
        tag != "audio/wave") {
      throw DecodeError("unsupported format '" + std::string(*hint) + "'; only WAV is supported");
    }
  }
  if (bytes.empty()) throw DecodeError("empty input");
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DecodeError("unsupported container; expected RIFF/WAVE");
  }

  std::optional<FormatChunk> fmt;
  std::span<const std::uint8_t> data;
  bool have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* hdr = bytes.data() + pos;
    const std::uint32_t size = read_u32(hdr + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw DecodeError("truncated fmt chunk");
      const std::uint8_t* f = bytes.data() + body;
      FormatChunk c;
      c.format = read_u16(f);
      c.channels = read_u16(f + 2);
      c.sample_rate = read_u32(f + 4);
      c.bits = read_u16(f + 14);
      if (c.format == kFormatExtensible) {
        if (size < 26) throw DecodeError("truncated extensible fmt chunk");
        c.format = read_u16(f + 24);
      }
      fmt = c;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (body + size > bytes.size()) throw DecodeError("truncated data chunk");
      data = bytes.subspan(body, size);
      have_data = true;
      break;
    }
    pos = body + size + (size & 1U);
  }

  if (!fmt) throw DecodeError("missing fmt chunk");
  if (!have_data) throw DecodeError("missing data chunk");
  const bool pcm_ok = fmt->format == kFormatPcm && (fmt->bits == 16 || fmt->bits == 24 || fmt->bits == 32);
  const bool float_ok = fmt->format == kFormatFloat && fmt->bits == 32;
  if (!pcm_ok && !float_ok) {
    throw DecodeError("unsupported WAV encoding (format " + std::to_string(fmt->format) + ", " +
                      std::to_string(fmt->bits) + " bits)");
  }
  if (fmt->channels < 1 || fmt->channels > 2) {
    throw DecodeError("unsupported channel count " + std::to_string(fmt->channels));
  }
  if (fmt->sample_rate == 0) throw DecodeError("zero sample rate");

  const std::size_t bytes_per_sample = fmt->bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * fmt->channels;
  const std::size_t frames = data.size() / frame_bytes;
  if (frames == 0) throw DecodeError("zero-length audio");

  std::vector<std::vector<double>> channels(fmt->channels, std::vector<double>(frames));
  const std::uint8_t* p = data.data();
  for (std::size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < fmt->channels; ++c) {
      channels[c][i] = decode_sample(p, *fmt);
      p += bytes_per_sample;
    }
  }
  return AudioClip(std::move(channels), static_cast<int>(fmt->sample_rate));
}

AudioClip read_audio_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_audio(bytes);
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip, WavEncoding encoding) {
  std::uint16_t format = kFormatPcm;
  std::uint16_t bits = 16;
  switch (encoding) {
    case WavEncoding::kPcm16: bits = 16; break;
    case WavEncoding::kPcm24: bits = 24; break;
    case WavEncoding::kPcm32: bits = 32; break;
    case WavEncoding::kFloat32: bits = 32; format = kFormatFloat; break;
  }
  const auto channels = static_cast<std::uint16_t>(clip.channels());
  const auto frames = clip.frame_count();
  const std::uint32_t data_size = static_cast<std::uint32_t>(frames * channels * (bits / 8));

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  auto put = [&](std::uint32_t v, int n) {
    for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  };
  auto tag = [&](const char* s) { out.insert(out.end(), s, s + 4); };
  tag("RIFF");
  put(36 + data_size, 4);
  tag("WAVE");
  tag("fmt ");
  put(16, 4);
  put(format, 2);
  put(channels, 2);
  put(static_cast<std::uint32_t>(clip.sample_rate()), 4);
  put(static_cast<std::uint32_t>(clip.sample_rate()) * channels * (bits / 8), 4);
  put(channels * (bits / 8), 2);
  put(bits, 2);
  tag("data");
  put(data_size, 4);
  for (std::size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      const double s = std::clamp(clip.channel(c)[i], -1.0, 1.0);
      switch (encoding) {
        case WavEncoding::kPcm16:
          put(static_cast<std::uint32_t>(static_cast<std::int32_t>(std::lround(std::clamp(s * 32768.0, -32768.0, 32767.0)))), 2);
          break;
        case WavEncoding::kPcm24:
          put(static_cast<std::uint32_t>(static_cast<std::int32_t>(std::lround(std::clamp(s * 8388608.0, -8388608.0, 8388607.0)))), 3);
          break;
        case WavEncoding::kPcm32:
          put(static_cast<std::uint32_t>(static_cast<std::int32_t>(std::llround(std::clamp(s * 2147483648.0, -2147483648.0, 2147483647.0)))), 4);
          break;
        case WavEncoding::kFloat32:
          put(std::bit_cast<std::uint32_t>(static_cast<float>(s)), 4);
          break;
      }
    }
  }
  return out;
}

namespace {

std::vector<double> downmix(const AudioClip& clip) {
  const auto n = clip.frame_count();
  if (clip.channels() == 1) {
    auto s = clip.samples();
    return {s.begin(), s.end()};
  }
  std::vector<double> out(n, 0.0);
  for (int c = 0; c < clip.channels(); ++c) {
    auto ch = clip.channel(c);
    for (std::size_t i = 0; i < n; ++i) out[i] += ch[i];
  }
  const double inv = 1.0 / clip.channels();
  for (auto& s : out) s *= inv;
  return out;
}

// Zero crossings of the low-pass kernel on each side of the output instant.
constexpr double kSincZeros = 16.0;
constexpr double kCutoffFraction = 0.95;

struct SincResampler {
  std::span<const double> in;
  double step;       // input samples per output sample
  double cutoff;     // normalized to the input Nyquist
  double half_width; // in input samples

  SincResampler(std::span<const double> input, int from, int to)
      : in(input),
        step(static_cast<double>(from) / to),
        cutoff(kCutoffFraction * std::min(1.0, static_cast<double>(to) / from)),
        half_width(kSincZeros / cutoff) {}

  double operator()(std::size_t n) const {
    const double t = static_cast<double>(n) * step;
    const auto lo = static_cast<std::ptrdiff_t>(std::ceil(t - half_width));
    const auto hi = static_cast<std::ptrdiff_t>(std::floor(t + half_width));
    const auto last = static_cast<std::ptrdiff_t>(in.size()) - 1;
    double acc = 0.0;
    double norm = 0.0;
    for (auto k = std::max<std::ptrdiff_t>(lo, 0); k <= std::min(hi, last); ++k) {
      const double x = static_cast<double>(k) - t;
      const double arg = std::numbers::pi * cutoff * x;
      const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(arg) / arg;
      const double win = 0.5 + 0.5 * std::cos(std::numbers::pi * x / half_width);
      const double w = sinc * win;
      acc += w * in[static_cast<std::size_t>(k)];
      norm += w;
    }
    return norm != 0.0 ? acc / norm : 0.0;
  }
};

std::size_t resampled_length(std::size_t n, int from, int to) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * to / from));
}

}  // namespace

AudioClip resample_mono_serial(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw std::invalid_argument("target rate must be positive");
  auto mono = downmix(clip);
  if (clip.sample_rate() == target_rate) return AudioClip::mono(std::move(mono), target_rate);
  const SincResampler kernel(mono, clip.sample_rate(), target_rate);
  std::vector<double> out(resampled_length(mono.size(), clip.sample_rate(), target_rate));
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = kernel(n);
  return AudioClip::mono(std::move(out), target_rate);
}

AudioClip resample_mono(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw std::invalid_argument("target rate must be positive");
  auto mono = downmix(clip);
  if (clip.sample_rate() == target_rate) return AudioClip::mono(std::move(mono), target_rate);
  const SincResampler kernel(mono, clip.sample_rate(), target_rate);
  std::vector<double> out(resampled_length(mono.size(), clip.sample_rate(), target_rate));
  const auto count = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < count; ++n) out[static_cast<std::size_t>(n)] = kernel(static_cast<std::size_t>(n));
  return AudioClip::mono(std::move(out), target_rate);
}

}  // namespace trackmate
