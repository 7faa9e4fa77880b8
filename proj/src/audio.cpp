// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include "coala/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>

#include <Eigen/Core>

#include "coala/tensor.hpp"

namespace coala {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
  out.write(b, 2);
}
void write_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>(v >> 24)};
  out.write(b, 4);
}

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// Windowed sinc h(u) = sinc(u) * kaiser(u / zeros), tabulated on |u| in
// [0, zeros] at kTableDensity points per zero crossing.
constexpr int kSincZeros = 32;
constexpr int kTableDensity = 512;
constexpr double kKaiserBeta = 8.0;
constexpr double kRolloff = 0.95;

const std::vector<double>& sinc_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(kSincZeros * kTableDensity + 2, 0.0);
    const double norm = std::cyl_bessel_i(0.0, kKaiserBeta);
    for (int i = 0; i <= kSincZeros * kTableDensity; ++i) {
      const double u = static_cast<double>(i) / kTableDensity;
      const double x = std::numbers::pi * u;
      const double sinc = i == 0 ? 1.0 : std::sin(x) / x;
      const double r = u / kSincZeros;
      const double window = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / norm;
      t[i] = sinc * window;
    }
    return t;
  }();
  return table;
}

double windowed_sinc(double u) {
  const auto& table = sinc_table();
  const double pos = std::abs(u) * kTableDensity;
  const auto i = static_cast<std::size_t>(pos);
  if (i >= static_cast<std::size_t>(kSincZeros * kTableDensity)) return 0.0;
  const double frac = pos - static_cast<double>(i);
  return table[i] + frac * (table[i + 1] - table[i]);
}

std::vector<float> hamming(std::size_t n) {
  std::vector<float> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = static_cast<float>(0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / n));
  }
  return w;
}

// rows x cols output of a [rows x inner] * [cols x inner]^T product.
Matrix multiply_transposed(const Matrix& a, const Matrix& b) {
  using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Matrix out(a.rows, b.rows);
  Eigen::Map<const RowMajor> ma(a.values.data(), a.rows, a.cols);
  Eigen::Map<const RowMajor> mb(b.values.data(), b.rows, b.cols);
  Eigen::Map<RowMajor> mo(out.values.data(), out.rows, out.cols);
  mo.noalias() = ma * mb.transpose();
  return out;
}

}  // namespace

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(path.string() + ": not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (available < 16) throw FormatError(path.string() + ": truncated fmt chunk");
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible && available >= 26) format = read_u16(chunk + 32);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = available;
    }
    pos = body + size + (size & 1);
  }
  if (format == 0) throw FormatError(path.string() + ": missing fmt chunk");
  if (data == nullptr) throw FormatError(path.string() + ": missing data chunk");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!(pcm16 || float32) || channels < 1 || channels > 2 || rate == 0) {
    std::ostringstream msg;
    msg << path.string() << ": unsupported WAVE format (format tag " << format << ", " << bits
        << " bits, " << channels << " channels, " << rate
        << " Hz); expected PCM 16-bit or float 32-bit, mono or stereo";
    throw FormatError(msg.str());
  }

  const std::size_t width = bits / 8;
  const std::size_t frames = data_size / (width * channels);
  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (i * channels + c) * width;
      if (pcm16) {
        acc += static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        const std::uint32_t u = read_u32(p);
        float f;
        std::memcpy(&f, &u, 4);
        acc += std::clamp(static_cast<double>(f), -1.0, 1.0);
      }
    }
    clip.samples[i] = static_cast<float>(acc / channels);
  }
  if (clip.samples.empty()) throw FormatError(path.string() + ": no audio samples");
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 4);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  write_u32(out, 16);
  write_u16(out, kFormatFloat);
  write_u16(out, 1);
  write_u32(out, clip.sample_rate);
  write_u32(out, clip.sample_rate * 4);
  write_u16(out, 4);
  write_u16(out, 32);
  out.write("data", 4);
  write_u32(out, data_bytes);
  for (float s : clip.samples) {
    std::uint32_t u;
    std::memcpy(&u, &s, 4);
    write_u32(out, u);
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

AudioClip resample(const AudioClip& clip, std::uint32_t target_rate) {
  if (clip.sample_rate == 0 || target_rate == 0) throw std::invalid_argument("sample rate must be positive");
  if (clip.sample_rate == target_rate) return clip;
  const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
  const double cutoff = kRolloff * std::min(1.0, ratio);
  const double reach = kSincZeros / cutoff;
  const std::size_t n_in = clip.samples.size();
  const auto n_out = static_cast<std::size_t>(std::llround(static_cast<double>(n_in) * ratio));

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  for (std::size_t j = 0; j < n_out; ++j) {
    const double t = static_cast<double>(j) / ratio;
    const auto lo = static_cast<std::ptrdiff_t>(std::ceil(t - reach));
    const auto hi = static_cast<std::ptrdiff_t>(std::floor(t + reach));
    double acc = 0.0;
    for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo, 0);
         i <= std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(n_in) - 1); ++i) {
      acc += clip.samples[i] * windowed_sinc(cutoff * (t - static_cast<double>(i)));
    }
    out.samples[j] = static_cast<float>(cutoff * acc);
  }
  return out;
}

AudioClip conform(const AudioClip& clip) {
  AudioClip out = resample(clip, kSampleRate);
  out.samples.resize(kClipSamples, 0.0f);
  return out;
}

std::size_t frame_count(std::size_t num_samples) {
  return num_samples < kFftSize ? 0 : (num_samples - kFftSize) / kHopSize + 1;
}

Matrix power_spectrogram(std::span<const float> samples) {
  const std::size_t frames = frame_count(samples.size());
  const std::size_t bins = kFftSize / 2 + 1;
  Matrix power(frames, bins);
  if (frames == 0) return power;

  float* in = fftwf_alloc_real(kFftSize);
  fftwf_complex* out = fftwf_alloc_complex(bins);
  fftwf_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftwf_plan_dft_r2c_1d(static_cast<int>(kFftSize), in, out, FFTW_ESTIMATE);
  }
  static const std::vector<float> window = hamming(kFftSize);
  for (std::size_t f = 0; f < frames; ++f) {
    const float* src = samples.data() + f * kHopSize;
    for (std::size_t i = 0; i < kFftSize; ++i) in[i] = src[i] * window[i];
    fftwf_execute(plan);
    for (std::size_t k = 0; k < bins; ++k) power(f, k) = out[k][0] * out[k][0] + out[k][1] * out[k][1];
  }
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftwf_destroy_plan(plan);
  }
  fftwf_free(in);
  fftwf_free(out);
  return power;
}

double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return hz < min_log_hz ? hz / f_sp : min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return mel < min_log_mel ? f_sp * mel : min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

Matrix mel_filterbank(std::size_t n_mels, std::size_t n_fft, double sample_rate, double f_min,
                      double f_max) {
  const std::size_t bins = n_fft / 2 + 1;
  std::vector<double> hz(n_mels + 2);
  const double m_lo = hz_to_mel(f_min), m_hi = hz_to_mel(f_max);
  for (std::size_t i = 0; i < hz.size(); ++i) {
    hz[i] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(i) / (n_mels + 1));
  }
  Matrix fb(n_mels, bins);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double enorm = 2.0 / (hz[m + 2] - hz[m]);
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      const double lower = (f - hz[m]) / (hz[m + 1] - hz[m]);
      const double upper = (hz[m + 2] - f) / (hz[m + 2] - hz[m + 1]);
      fb(m, k) = static_cast<float>(std::max(0.0, std::min(lower, upper)) * enorm);
    }
  }
  return fb;
}

Matrix logmel_from_power(const Matrix& power) {
  static const Matrix fb = mel_filterbank(kMelBands, kFftSize, kSampleRate, 0.0, kSampleRate / 2.0);
  Matrix mel = multiply_transposed(power, fb);
  for (float& v : mel.values) v = static_cast<float>(std::log10(std::max<double>(v, kLogFloor)));
  return mel;
}

Matrix logmel(const AudioClip& clip) { return logmel_from_power(power_spectrogram(clip.samples)); }

void minmax_scale(std::span<float> values) {
  if (values.empty()) return;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const float mn = *lo, mx = *hi;
  if (!(mx > mn)) {
    std::fill(values.begin(), values.end(), 0.0f);
    return;
  }
  const float range = mx - mn;
  for (float& v : values) v = std::clamp((v - mn) / range, 0.0f, 1.0f);
}

SpectrogramPatch extract_patch(const Matrix& logmel, std::string clip_id) {
  if (logmel.rows < kPatchFrames) {
    throw std::invalid_argument("log-mel matrix has " + std::to_string(logmel.rows) +
                                " frames; a patch needs " + std::to_string(kPatchFrames));
  }
  std::size_t best = 0;
  double best_energy = -std::numeric_limits<double>::infinity();
  for (std::size_t offset = 0; offset + kPatchFrames <= logmel.rows; offset += kPatchStep) {
    double energy = 0.0;
    for (std::size_t i = offset * logmel.cols; i < (offset + kPatchFrames) * logmel.cols; ++i) {
      energy += logmel.values[i];
    }
    if (energy > best_energy) {
      best_energy = energy;
      best = offset;
    }
  }
  SpectrogramPatch patch;
  patch.clip_id = std::move(clip_id);
  patch.frame_offset = static_cast<std::uint32_t>(best);
  patch.values.assign(logmel.values.begin() + best * logmel.cols,
                      logmel.values.begin() + (best + kPatchFrames) * logmel.cols);
  minmax_scale(patch.values);
  return patch;
}

Matrix delta(const Matrix& features, std::size_t half_width) {
  Matrix out(features.rows, features.cols);
  double denom = 0.0;
  for (std::size_t n = 1; n <= half_width; ++n) denom += 2.0 * static_cast<double>(n * n);
  const auto last = static_cast<std::ptrdiff_t>(features.cols) - 1;
  for (std::size_t r = 0; r < features.rows; ++r) {
    for (std::ptrdiff_t t = 0; t <= last; ++t) {
      double acc = 0.0;
      for (std::ptrdiff_t n = 1; n <= static_cast<std::ptrdiff_t>(half_width); ++n) {
        const float ahead = features(r, std::min(t + n, last));
        const float behind = features(r, std::max<std::ptrdiff_t>(t - n, 0));
        acc += static_cast<double>(n) * (ahead - behind);
      }
      out(r, t) = static_cast<float>(acc / denom);
    }
  }
  return out;
}

int pitch_class(double hz) {
  const long semis = std::lround(12.0 * std::log2(hz / 440.0));
  return static_cast<int>(((9 + semis) % 12 + 12) % 12);
}

SpectralShape spectral_shape(std::span<const float> magnitude, double sample_rate,
                             std::size_t n_fft) {
  double total = 0.0, first = 0.0;
  for (std::size_t k = 0; k < magnitude.size(); ++k) {
    const double f = static_cast<double>(k) * sample_rate / n_fft;
    total += magnitude[k];
    first += f * magnitude[k];
  }
  if (!(total > 0.0)) return {};
  SpectralShape s;
  s.centroid = first / total;
  double second = 0.0;
  for (std::size_t k = 0; k < magnitude.size(); ++k) {
    const double d = static_cast<double>(k) * sample_rate / n_fft - s.centroid;
    second += d * d * magnitude[k];
  }
  s.bandwidth = std::sqrt(second / total);
  return s;
}

AcousticDescriptors descriptors(const AudioClip& clip) {
  constexpr std::size_t kMfccBands = 128;
  constexpr std::size_t kMfccCoefficients = 20;
  static const Matrix fb = mel_filterbank(kMfccBands, kFftSize, kSampleRate, 0.0, kSampleRate / 2.0);
  static const Matrix dct = [] {
    Matrix d(kMfccCoefficients, kMfccBands);
    for (std::size_t c = 0; c < kMfccCoefficients; ++c) {
      const double scale = std::sqrt((c == 0 ? 1.0 : 2.0) / kMfccBands);
      for (std::size_t m = 0; m < kMfccBands; ++m) {
        d(c, m) = static_cast<float>(
            scale * std::cos(std::numbers::pi * c * (2.0 * m + 1.0) / (2.0 * kMfccBands)));
      }
    }
    return d;
  }();

  const Matrix power = power_spectrogram(clip.samples);
  const std::size_t frames = power.rows, bins = power.cols;

  // Double precision keeps the large-magnitude cepstra stable frame to frame.
  using RowMajorD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMajorD p = Eigen::Map<const RowMajorF>(power.values.data(), frames, bins).cast<double>();
  const RowMajorD w = Eigen::Map<const RowMajorF>(fb.values.data(), fb.rows, fb.cols).cast<double>();
  RowMajorD mel_db = p * w.transpose();
  mel_db = mel_db.unaryExpr([](double v) { return 10.0 * std::log10(std::max(v, kLogFloor)); });
  const RowMajorD cep = Eigen::Map<const RowMajorF>(dct.values.data(), dct.rows, dct.cols).cast<double>() *
                        mel_db.transpose();

  AcousticDescriptors d;
  d.mfcc = Matrix(kMfccCoefficients, frames);  // coefficients x frames
  Eigen::Map<RowMajorF>(d.mfcc.values.data(), kMfccCoefficients, frames) = cep.cast<float>();
  d.mfcc_delta = delta(d.mfcc);
  d.mfcc_delta2 = delta(d.mfcc_delta);

  std::vector<int> bin_class(bins, -1);
  for (std::size_t k = 1; k < bins; ++k) {
    bin_class[k] = pitch_class(static_cast<double>(k) * clip.sample_rate / kFftSize);
  }
  d.chroma = Matrix(12, frames);
  d.centroid = Matrix(1, frames);
  d.bandwidth = Matrix(1, frames);
  std::vector<float> magnitude(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    double classes[12] = {};
    for (std::size_t k = 1; k < bins; ++k) classes[bin_class[k]] += power(t, k);
    const double peak = *std::max_element(classes, classes + 12);
    for (int c = 0; c < 12; ++c) d.chroma(c, t) = peak > 0.0 ? static_cast<float>(classes[c] / peak) : 0.0f;

    for (std::size_t k = 0; k < bins; ++k) magnitude[k] = std::sqrt(power(t, k));
    const SpectralShape s = spectral_shape(magnitude, clip.sample_rate, kFftSize);
    d.centroid(0, t) = static_cast<float>(s.centroid);
    d.bandwidth(0, t) = static_cast<float>(s.bandwidth);
  }
  return d;
}

}  // namespace coala
