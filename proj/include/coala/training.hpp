// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "coala/audio.hpp"
#include "coala/io.hpp"
#include "coala/net.hpp"
#include "coala/objectives.hpp"
#include "coala/tags.hpp"

namespace coala {

struct TrainConfig {
  TrainMode mode = TrainMode::kAeC;
  /// Unset means 200, or 20 for the CNN baseline.
  std::optional<std::size_t> epochs;
  std::size_t batch_size = 128;
  double learning_rate = 0.005;
  double momentum = 0.0;
  std::optional<double> clip_norm;
  std::uint64_t seed = 0;
  LossWeights weights;
  ContrastiveDenominator denominator = ContrastiveDenominator::kExcludePositive;
  double val_fraction = 0.10;
  /// Also write epoch_<n>.ckpt every n epochs; 0 disables.
  std::size_t checkpoint_every = 0;
  ModelTopology topology;

  std::size_t effective_epochs() const;
  void validate() const;
  nlohmann::json to_json() const;
  /// Fields absent from `j` keep their current values.
  void merge_json(const nlohmann::json& j);
};

/// Paired patches and multi-hot tag vectors, stored flat.
struct Dataset {
  std::size_t patch_values = kPatchFrames * kMelBands;
  std::size_t num_tags = 0;
  std::vector<std::string> clip_ids;
  std::vector<float> patches;  // size() x patch_values
  std::vector<float> tags;     // size() x num_tags

  std::size_t size() const { return clip_ids.size(); }
  void add(const std::string& clip_id, std::span<const float> patch, std::span<const float> tag_bits);
  Dataset subset(std::span<const std::size_t> indices) const;
  std::span<const float> patch(std::size_t i) const { return {patches.data() + i * patch_values, patch_values}; }
  std::span<const float> tag_vector(std::size_t i) const { return {tags.data() + i * num_tags, num_tags}; }
};

/// Pairs each patch with its clip's tags by clip id. Clips whose tags all
/// fall outside the vocabulary are dropped and counted in `discarded`.
Dataset build_dataset(const std::vector<SpectrogramPatch>& patches,
                      const std::vector<ManifestEntry>& manifest, const Vocabulary& vocab,
                      std::size_t* discarded = nullptr);

/// Seeded disjoint split; the validation part has round(Q * fraction) records.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double val_fraction, std::uint64_t seed);

struct EpochSummary {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  LossBreakdown train;  // mean over steps
  std::optional<LossBreakdown> validation;  // mean over batches
};

struct TrainResult {
  CoalaModel model;  // state after the last epoch
  Checkpoint last;
  Checkpoint best;
  std::size_t best_epoch = 0;
  std::size_t total_steps = 0;
  std::vector<EpochSummary> history;
};

struct TrainHooks {
  /// One JSON object per optimisation step and per epoch.
  std::function<void(const nlohmann::json&)> log;
  /// Called after each epoch with the current model.
  std::function<void(const EpochSummary&, CoalaModel&)> on_epoch;
};

/// Raised when a loss or gradient becomes non-finite. The model is left at
/// its last good state.
class TrainingAborted : public NumericalError {
 public:
  TrainingAborted(const std::string& what, nlohmann::json diagnostic, Checkpoint last_good)
      : NumericalError(what), diagnostic(std::move(diagnostic)), last_good(std::move(last_good)) {}
  nlohmann::json diagnostic;
  Checkpoint last_good;
};

/// Parameter groups the optimiser updates in each mode.
std::vector<ParamGroup> trained_groups(TrainMode mode);

TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& config,
                  const TrainHooks& hooks = {});

/// Mean per-batch losses in evaluation mode over consecutive batches;
/// a trailing batch of fewer than two records is skipped.
LossBreakdown evaluate_losses(CoalaModel& model, const Dataset& data, const TrainConfig& config);

/// Audio-to-tag top-1 retrieval inside consecutive batches of `batch_size`.
/// A hit is a retrieved tag projection whose multi-hot vector equals the
/// query's own.
double retrieval_top1(CoalaModel& model, const Dataset& data, std::size_t batch_size);

/// Flattened eval-mode encoder output, one row of audio_latent() per patch.
std::vector<float> extract_embeddings(CoalaModel& model, std::span<const float> patches,
                                      std::size_t count);

/// Runs train() and writes best.ckpt, last.ckpt, log.jsonl and config.json
/// into `out_dir`. On abort, last-good.ckpt and nonfinite.json are written
/// before TrainingAborted propagates.
TrainResult train_to_directory(const Dataset& train_set, const Dataset& val_set,
                               const TrainConfig& config, const std::filesystem::path& out_dir,
                               const std::function<void(const EpochSummary&)>& progress = {});

}  // namespace coala
