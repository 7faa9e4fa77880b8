// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "coala/rng.hpp"
#include "coala/training.hpp"

namespace coala {
namespace {

ModelTopology tiny_topology() {
  ModelTopology t;
  t.patch_size = 32;
  t.channels = 4;
  t.num_tags = 6;
  t.tag_hidden = 8;
  t.tag_latent = 4;
  t.projection = 4;
  t.cnn_hidden = 8;
  return t;
}

// Two patterns, each with its own tag set.
Dataset toy_dataset(std::size_t n, std::uint64_t seed) {
  Dataset d;
  d.patch_values = 32 * 32;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const bool a = i % 2 == 0;
    std::vector<float> patch(d.patch_values);
    for (std::size_t j = 0; j < patch.size(); ++j) {
      const bool lit = a ? (j / 32) < 16 : (j % 32) < 16;
      patch[j] = static_cast<float>(std::clamp((lit ? 0.8 : 0.2) + 0.05 * rng.normal(), 0.0, 1.0));
    }
    std::vector<float> tags(6, 0.0f);
    tags[a ? 0 : 3] = 1.0f;
    tags[a ? 1 : 4] = 1.0f;
    d.add("clip" + std::to_string(i), patch, tags);
  }
  return d;
}

TrainConfig tiny_config(TrainMode mode) {
  TrainConfig c;
  c.mode = mode;
  c.epochs = 2;
  c.batch_size = 8;
  c.learning_rate = 1e-3;
  c.topology = tiny_topology();
  c.seed = 11;
  return c;
}

TEST(Split, DisjointAndSized) {
  Dataset d = toy_dataset(50, 1);
  auto [train, val] = split(d, 0.1, 7);
  EXPECT_EQ(val.size(), 5u);
  EXPECT_EQ(train.size(), 45u);
  std::set<std::string> ids(train.clip_ids.begin(), train.clip_ids.end());
  for (const auto& id : val.clip_ids) EXPECT_FALSE(ids.contains(id));
  auto [train2, val2] = split(d, 0.1, 7);
  EXPECT_EQ(val.clip_ids, val2.clip_ids);
  EXPECT_THROW(split(d, 0.0, 7), std::invalid_argument);
}

TEST(BuildDataset, PairsByClipAndCountsDiscards) {
  Vocabulary vocab = build_vocabulary({{"dog"}, {"cat"}, {"dog", "bark"}, {"bird"}});
  std::vector<ManifestEntry> manifest{{"a", "a.wav", {"dog"}}, {"b", "b.wav", {"truck"}}};
  std::vector<SpectrogramPatch> patches(2);
  patches[0].clip_id = "a";
  patches[1].clip_id = "b";
  for (auto& p : patches) p.values.assign(kPatchFrames * kMelBands, 0.5f);
  std::size_t discarded = 0;
  Dataset d = build_dataset(patches, manifest, vocab, &discarded);
  EXPECT_EQ(d.size(), 1u);
  EXPECT_EQ(discarded, 1u);
  EXPECT_EQ(d.tag_vector(0)[vocab.index.at("dog")], 1.0f);
  patches[0].clip_id = "unknown";
  EXPECT_THROW(build_dataset(patches, manifest, vocab), FormatError);
}

TEST(Train, StepsPerEpochDropPartialBatch) {
  Dataset d = toy_dataset(21, 2);
  TrainConfig c = tiny_config(TrainMode::kAeC);
  std::size_t step_lines = 0;
  TrainHooks hooks;
  hooks.log = [&](const nlohmann::json& j) {
    if (j.contains("step")) ++step_lines;
  };
  TrainResult r = train(d, Dataset{}, c, hooks);
  EXPECT_EQ(r.history.size(), 2u);
  EXPECT_EQ(r.history[0].steps, 2u);
  EXPECT_EQ(r.total_steps, 4u);
  EXPECT_EQ(step_lines, 4u);
  EXPECT_FALSE(r.history[0].validation);
  EXPECT_TRUE(std::isfinite(r.history[1].train.total));
}

TEST(Train, DeterministicCheckpoints) {
  Dataset d = toy_dataset(24, 3);
  auto [train_set, val_set] = split(d, 0.25, 1);
  TrainConfig c = tiny_config(TrainMode::kAeC);
  std::ostringstream a, b;
  write_checkpoint(a, coala::train(train_set, val_set, c).last);
  write_checkpoint(b, coala::train(train_set, val_set, c).last);
  EXPECT_EQ(a.str(), b.str());
  c.seed = 12;
  std::ostringstream other;
  write_checkpoint(other, coala::train(train_set, val_set, c).last);
  EXPECT_NE(a.str(), other.str());
}

TEST(Train, ModeFreezesUntrainedGroups) {
  Dataset d = toy_dataset(16, 4);
  for (TrainMode mode : {TrainMode::kEC, TrainMode::kCnn}) {
    TrainConfig c = tiny_config(mode);
    CoalaModel init(c.topology, c.seed);
    const Checkpoint before = init.to_checkpoint();
    TrainResult r = train(d, Dataset{}, c);
    const auto groups = trained_groups(mode);
    const std::set<ParamGroup> trained(groups.begin(), groups.end());
    for (ParamGroup g : kAllParamGroups) {
      for (const auto& p : r.model.parameters(g)) {
        const auto* e0 = before.find(p.name);
        ASSERT_NE(e0, nullptr) << p.name;
        const auto now = p.tensor.data();
        const bool same = std::equal(now.begin(), now.end(), e0->values.begin());
        if (trained.contains(g)) {
          EXPECT_FALSE(same) << to_string(mode) << " " << p.name;
        } else {
          EXPECT_TRUE(same) << to_string(mode) << " " << p.name;
        }
      }
    }
  }
}

TEST(Train, LossDecreasesOnToyData) {
  Dataset d = toy_dataset(64, 5);
  auto [train_set, val_set] = split(d, 0.25, 1);
  TrainConfig c = tiny_config(TrainMode::kAeC);
  c.epochs = 15;
  c.learning_rate = 2e-3;
  c.momentum = 0.9;
  TrainResult r = train(train_set, val_set, c);
  EXPECT_LT(r.history.back().validation->total, r.history.front().validation->total);
  EXPECT_GE(r.best_epoch, 1u);
}

TEST(Train, RejectsMismatchedData) {
  Dataset d = toy_dataset(16, 6);
  TrainConfig c = tiny_config(TrainMode::kAeC);
  c.topology.num_tags = 7;
  EXPECT_THROW(train(d, Dataset{}, c), DimensionError);
  c = tiny_config(TrainMode::kAeC);
  c.batch_size = 32;
  EXPECT_THROW(train(d, Dataset{}, c), std::invalid_argument);
}

TEST(Train, AbortsOnNonFiniteInput) {
  Dataset d = toy_dataset(16, 7);
  d.patches[5] = std::numeric_limits<float>::quiet_NaN();
  TrainConfig c = tiny_config(TrainMode::kAeC);
  const auto dir = std::filesystem::temp_directory_path() / "coala_test_abort";
  std::filesystem::remove_all(dir);
  try {
    train_to_directory(d, Dataset{}, c, dir);
    FAIL() << "expected TrainingAborted";
  } catch (const TrainingAborted& e) {
    EXPECT_TRUE(e.diagnostic.contains("clip_ids"));
    EXPECT_FALSE(e.last_good.entries.empty());
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "last-good.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "nonfinite.json"));
  std::filesystem::remove_all(dir);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig c = tiny_config(TrainMode::kEC);
  c.clip_norm = 5.0;
  TrainConfig back;
  back.merge_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  back.merge_json({{"clip_norm", 0.0}});
  EXPECT_FALSE(back.clip_norm.has_value());
  TrainConfig cnn;
  cnn.mode = TrainMode::kCnn;
  EXPECT_EQ(cnn.effective_epochs(), 20u);
  EXPECT_EQ(TrainConfig{}.effective_epochs(), 200u);
  c.batch_size = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Retrieval, BoundedAndNeedsAFullBatch) {
  Dataset d = toy_dataset(16, 8);
  CoalaModel model(tiny_topology(), 3);
  const double acc = retrieval_top1(model, d, 8);
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
  EXPECT_THROW(retrieval_top1(model, d, 32), std::invalid_argument);
}

TEST(Embeddings, ShapeAndEvalMode) {
  Dataset d = toy_dataset(5, 9);
  CoalaModel model(tiny_topology(), 3);
  auto e1 = extract_embeddings(model, d.patches, 5);
  auto e2 = extract_embeddings(model, d.patches, 5);
  EXPECT_EQ(e1.size(), 5u * tiny_topology().audio_latent());
  EXPECT_EQ(e1, e2);
  for (float v : e1) EXPECT_GE(v, 0.0f);
}

}  // namespace
}  // namespace coala
