// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "coala/net.hpp"

namespace coala {
namespace {

ModelTopology small_topology() {
  ModelTopology t;
  t.patch_size = 32;
  t.conv_blocks = 3;
  t.channels = 8;
  t.num_tags = 10;
  t.tag_hidden = 16;
  t.tag_latent = 32;
  t.projection = 32;
  t.cnn_hidden = 16;
  return t;
}

Tensor uniform(Shape shape, Rng& rng, float lo = 0.0f, float hi = 1.0f) {
  std::vector<float> v(shape_numel(shape));
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return Tensor(std::move(shape), std::move(v));
}

float min_of(const Tensor& t) { return *std::min_element(t.data().begin(), t.data().end()); }
float max_of(const Tensor& t) { return *std::max_element(t.data().begin(), t.data().end()); }

TEST(CoalaNet, DefaultShapeChain) {
  ModelTopology topo;
  CoalaModel model(topo, 1);
  Rng rng(2);
  Tensor x = uniform({128, 1, 96, 96}, rng);
  ForwardContext ctx{false, nullptr};
  Tensor z = model.encode_audio(x, ctx);
  EXPECT_EQ(z.shape(), (Shape{128, 128, 3, 3}));
  EXPECT_EQ(topo.audio_latent(), 1152u);
  Tensor phi = model.project_audio(z);
  EXPECT_EQ(phi.shape(), (Shape{128, 1152}));
  Tensor xh = model.decode_audio(z, ctx);
  EXPECT_EQ(xh.shape(), x.shape());
  EXPECT_GT(min_of(xh), 0.0f);
  EXPECT_LT(max_of(xh), 1.0f);
}

TEST(CoalaNet, TagShapesAndRanges) {
  ModelTopology topo;
  CoalaModel model(topo, 3);
  Rng rng(4);
  std::vector<float> bits(1000 * 1000);
  for (float& b : bits) b = rng.uniform() < 0.01 ? 1.0f : 0.0f;
  Tensor y({1000, 1000}, bits);
  ForwardContext ctx{true, &rng};
  Tensor z = model.encode_tags(y, ctx);
  EXPECT_EQ(z.shape(), (Shape{1000, 1152}));
  EXPECT_GE(min_of(z), 0.0f);
  Tensor yh = model.decode_tags(z, ctx);
  EXPECT_EQ(yh.shape(), (Shape{1000, 1000}));
  EXPECT_GT(min_of(yh), 0.0f);
  EXPECT_LT(max_of(yh), 1.0f);
  EXPECT_GE(min_of(model.project_tags(z)), 0.0f);
}

TEST(CoalaNet, ZeroTagBatchIsValid) {
  CoalaModel model(small_topology(), 5);
  Rng rng(5);
  ForwardContext ctx{true, &rng};
  Tensor z = model.encode_tags(Tensor::zeros({4, 10}), ctx);
  EXPECT_EQ(z.shape(), (Shape{4, 32}));
}

TEST(CoalaNet, EvalModeIsRepeatable) {
  CoalaModel model(small_topology(), 6);
  Rng rng(6);
  Tensor x = uniform({3, 1, 32, 32}, rng);
  ForwardContext ctx{false, nullptr};
  Tensor a = model.decode_audio(model.encode_audio(x, ctx), ctx);
  Tensor b = model.decode_audio(model.encode_audio(x, ctx), ctx);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(CoalaNet, WrongInputShapesAreRejected) {
  CoalaModel model(small_topology(), 7);
  ForwardContext ctx{false, nullptr};
  EXPECT_THROW(model.encode_audio(Tensor::zeros({2, 1, 31, 32}), ctx), DimensionError);
  EXPECT_THROW(model.encode_audio(Tensor::zeros({2, 32, 32}), ctx), DimensionError);
  EXPECT_THROW(model.encode_tags(Tensor::zeros({2, 11}), ctx), DimensionError);
  EXPECT_THROW(model.decode_audio(Tensor::zeros({2, 8, 4, 3}), ctx), DimensionError);
}

TEST(CoalaNet, IdentityProjectionPassesNonnegativeLatent) {
  CoalaModel model(small_topology(), 8);
  auto params = model.parameters(ParamGroup::kTagProjection);
  ASSERT_EQ(params.size(), 2u);
  auto w = params[0].tensor.mutable_data();
  std::fill(w.begin(), w.end(), 0.0f);
  for (std::size_t i = 0; i < 32; ++i) w[i * 32 + i] = 1.0f;
  Rng rng(8);
  Tensor z = uniform({2, 32}, rng);
  Tensor phi = model.project_tags(z);
  for (std::size_t i = 0; i < z.numel(); ++i) EXPECT_FLOAT_EQ(phi.data()[i], z.data()[i]);
}

TEST(CoalaNet, ParameterCounts) {
  ModelTopology topo;
  CoalaModel model(topo, 9);
  // conv: 128*1*16+128 then 4x (128*128*16+128); BN 2*128 per non-output block.
  const std::size_t encoder = (2048 + 128) + 4 * (262144 + 128) + 5 * 256;
  const std::size_t decoder = 4 * (262144 + 128) + 4 * 256 + (2048 + 1);
  EXPECT_EQ(model.parameter_count(ParamGroup::kAudioEncoder), encoder);
  EXPECT_EQ(model.parameter_count(ParamGroup::kAudioDecoder), decoder);
  EXPECT_EQ(model.parameter_count(ParamGroup::kAudioProjection), 1152u * 1152u + 1152u);
  EXPECT_EQ(model.parameter_count(ParamGroup::kTagEncoder),
            (1000u * 512 + 512 + 1024) + (512u * 512 + 512 + 1024) + (512u * 1152 + 1152 + 2304));
}

TEST(CoalaNet, ParameterGroupsAreDisjoint) {
  CoalaModel model(small_topology(), 10);
  std::set<const void*> seen;
  std::set<std::string> names;
  std::size_t total = 0;
  for (auto g : kAllParamGroups) {
    for (auto& p : model.parameters(g)) {
      seen.insert(p.tensor.node().get());
      names.insert(p.name);
      EXPECT_EQ(p.name.rfind(std::string(group_name(g)) + ".", 0), 0u) << p.name;
      ++total;
    }
  }
  EXPECT_EQ(seen.size(), total);
  EXPECT_EQ(names.size(), total);
}

TEST(CoalaNet, CheckpointRoundTripReproducesOutputs) {
  CoalaModel model(small_topology(), 11);
  Rng rng(11);
  // Move BN running stats away from their initial values.
  ForwardContext train{true, &rng};
  model.encode_audio(uniform({4, 1, 32, 32}, rng), train);
  Checkpoint ck = model.to_checkpoint({{"note", "x"}});
  std::stringstream buffer;
  write_checkpoint(buffer, ck);
  CoalaModel restored = CoalaModel::from_checkpoint(read_checkpoint(buffer));
  EXPECT_EQ(restored.topology(), model.topology());
  Tensor x = uniform({2, 1, 32, 32}, rng);
  ForwardContext ctx{false, nullptr};
  Tensor a = model.encode_audio(x, ctx);
  Tensor b = restored.encode_audio(x, ctx);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(CoalaNet, LoadRejectsTopologyMismatchByTensorName) {
  CoalaModel model(small_topology(), 12);
  Checkpoint ck = model.to_checkpoint();
  for (auto& e : ck.entries) {
    if (e.name == "tag_encoder.0.fc.weight") e.shape = {16, 11};
  }
  try {
    model.load_checkpoint(ck);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("tag_encoder.0.fc.weight"), std::string::npos);
  }
  ModelTopology other = small_topology();
  other.channels = 4;
  CoalaModel different(other, 12);
  EXPECT_THROW(different.load_checkpoint(model.to_checkpoint()), FormatError);
}

TEST(CoalaNet, SeedDeterminesInitialisation) {
  CoalaModel a(small_topology(), 13), b(small_topology(), 13), c(small_topology(), 14);
  auto pa = a.parameters(ParamGroup::kAudioEncoder);
  auto pb = b.parameters(ParamGroup::kAudioEncoder);
  auto pc = c.parameters(ParamGroup::kAudioEncoder);
  EXPECT_TRUE(std::equal(pa[0].tensor.data().begin(), pa[0].tensor.data().end(),
                         pb[0].tensor.data().begin()));
  EXPECT_FALSE(std::equal(pa[0].tensor.data().begin(), pa[0].tensor.data().end(),
                          pc[0].tensor.data().begin()));
}

}  // namespace
}  // namespace coala
