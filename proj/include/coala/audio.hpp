// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace coala {

inline constexpr std::uint32_t kSampleRate = 22050;
inline constexpr std::size_t kClipSamples = 10 * kSampleRate;
inline constexpr std::size_t kFftSize = 1024;
inline constexpr std::size_t kHopSize = 512;
inline constexpr std::size_t kMelBands = 96;
inline constexpr std::size_t kPatchFrames = 96;
inline constexpr std::size_t kPatchStep = 12;
inline constexpr double kLogFloor = 1e-10;

struct AudioClip {
  std::vector<float> samples;  // mono, [-1, 1]
  std::uint32_t sample_rate = kSampleRate;
};

/// Row-major float matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), values(r * c, fill) {}
  float& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  float operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const float> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

/// RIFF/WAVE reader for PCM16 and float32, mono or stereo (averaged).
AudioClip load_wav(const std::filesystem::path& path);
/// Writes mono float32 WAVE.
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

/// Band-limited Kaiser-windowed sinc resampling.
AudioClip resample(const AudioClip& clip, std::uint32_t target_rate);
/// Resample to 22050 Hz, then zero-pad or truncate to exactly 10 s.
AudioClip conform(const AudioClip& clip);

std::size_t frame_count(std::size_t num_samples);

/// Power spectrogram [frames x (kFftSize/2+1)], periodic Hamming window,
/// frames start at multiples of the hop with no centring.
Matrix power_spectrogram(std::span<const float> samples);

/// Slaney mel filterbank with area normalisation: [n_mels x (n_fft/2+1)].
Matrix mel_filterbank(std::size_t n_mels, std::size_t n_fft, double sample_rate,
                      double f_min, double f_max);
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// log10(max(mel energy, 1e-10)), [frames x 96].
Matrix logmel(const AudioClip& clip);
Matrix logmel_from_power(const Matrix& power);

struct SpectrogramPatch {
  std::string clip_id;
  std::uint32_t frame_offset = 0;
  std::vector<float> values;  // kPatchFrames x kMelBands, frame-major, in [0, 1]
};

/// In place; a constant range maps to zeros.
void minmax_scale(std::span<float> values);

/// The 96-frame window at a multiple of 12 with the largest sum (lowest
/// offset on ties), min-max scaled.
SpectrogramPatch extract_patch(const Matrix& logmel, std::string clip_id = {});

struct AcousticDescriptors {
  // Each matrix is dims x frames.
  Matrix mfcc;
  Matrix mfcc_delta;
  Matrix mfcc_delta2;
  Matrix chroma;
  Matrix centroid;
  Matrix bandwidth;
};

AcousticDescriptors descriptors(const AudioClip& clip);

/// Regression slope over a (2*half_width+1)-frame window, edges replicated.
Matrix delta(const Matrix& features, std::size_t half_width = 4);

/// Pitch class with C = 0, ..., A = 9, B = 11, tuned to A440.
int pitch_class(double hz);

struct SpectralShape {
  double centroid = 0.0;
  double bandwidth = 0.0;
};
/// Centroid and spread of a magnitude spectrum whose bin k sits at
/// k * sample_rate / n_fft. An all-zero spectrum gives zeros.
SpectralShape spectral_shape(std::span<const float> magnitude, double sample_rate,
                             std::size_t n_fft);

}  // namespace coala
