// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "coala/audio.hpp"
#include "coala/io.hpp"
#include "coala/net.hpp"

namespace coala {

// ---- synthetic corpus -------------------------------------------------------

enum class WaveFamily { kNoiseBurst, kSineChord, kAmTone, kSweep };

struct Concept {
  WaveFamily family;
  double base_hz;  // centre of the frequency band
  std::vector<std::string> tags;
};

/// The built-in concept table (noise bursts, chords, AM tones, sweeps in
/// distinct bands).
const std::vector<Concept>& synthetic_concepts();

struct SyntheticCorpusSpec {
  std::size_t num_clips = 400;
  std::size_t num_concepts = 4;
  /// Standard deviation of additive white noise.
  double noise_level = 0.05;
  /// Per-clip frequency jitter, in octaves either side of the band centre.
  double jitter_octaves = 1.0;
  /// Probability that a clip carries one distractor tag.
  double distractor_rate = 0.5;
  double test_fraction = 0.25;
  double seconds = 10.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  void merge_json(const nlohmann::json& j);
};

struct SyntheticCorpus {
  std::vector<AudioClip> clips;
  std::vector<ManifestEntry> manifest;  // clip ids are clips/clip_NNNN.wav
  std::vector<LabelEntry> labels;       // concept id, train/test
};

/// Clip i belongs to concept i mod num_concepts. Tags: the concept's tags,
/// a register tag (low/high, from the sign of the jitter), an optional
/// distractor, and a tag shared by every clip.
SyntheticCorpus synthesize_corpus(const SyntheticCorpusSpec& spec);
/// Writes clips/*.wav, manifest.tsv, labels.tsv and spec.json.
void write_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus,
                  const SyntheticCorpusSpec& spec);

// ---- clip-level features -----------------------------------------------------

/// Non-overlapping 96-frame patches of a conformed clip, each min-max
/// scaled; a clip without a full patch yields one floor-padded patch.
std::vector<SpectrogramPatch> clip_patches(const AudioClip& conformed, const std::string& clip_id = {});

/// Mean of the encoder embeddings of clip_patches().
std::vector<float> embedding_feature(CoalaModel& model, const AudioClip& conformed);
/// Means then standard deviations over time of 20 MFCCs, deltas and
/// delta-deltas: 120 values.
std::vector<float> mfcc_feature(const AudioClip& conformed);

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Standardizer fit(const std::vector<std::vector<float>>& train);
  /// (x - mean) / stddev; dimensions with zero spread map to 0.
  std::vector<float> apply(const std::vector<float>& x) const;
};

// ---- downstream classifier --------------------------------------------------

struct MlpConfig {
  std::size_t hidden = 256;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t repeats = 10;
  std::uint64_t seed = 0;
};

struct ClassificationReport {
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::vector<double> accuracies;
  nlohmann::json to_json() const;
};

/// Standardises with training statistics, then trains and scores the MLP
/// `repeats` times with different seeds.
ClassificationReport run_classification(const std::vector<ClipFeature>& train,
                                        const std::vector<ClipFeature>& test, const MlpConfig& config);

/// One MLP run on already standardised features; returns test accuracy.
double train_and_score_mlp(const std::vector<std::vector<float>>& train_x, const std::vector<int>& train_y,
                           const std::vector<std::vector<float>>& test_x, const std::vector<int>& test_y,
                           std::size_t num_classes, const MlpConfig& config, std::uint64_t seed);

}  // namespace coala
