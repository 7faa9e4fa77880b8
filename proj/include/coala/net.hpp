// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "coala/checkpoint.hpp"
#include "coala/nn.hpp"
#include "coala/optim.hpp"

namespace coala {

/// Sizes of every network. Defaults:
/// 5 conv blocks of 128 4x4/stride-2 filters on 96x96 patches (latent
/// 128x3x3 = 1152), tag AE 1000 -> 512 -> 512 -> 1152.
struct ModelTopology {
  std::size_t patch_size = 96;
  std::size_t conv_blocks = 5;
  std::size_t channels = 128;
  std::size_t kernel = 4;
  std::size_t stride = 2;
  std::size_t padding = 1;
  std::size_t num_tags = 1000;
  std::size_t tag_hidden = 512;
  std::size_t tag_latent = 1152;
  std::size_t projection = 1152;
  std::size_t cnn_hidden = 512;
  double dropout = 0.25;

  std::size_t latent_side() const;
  /// Flattened audio latent size, channels * side * side.
  std::size_t audio_latent() const;

  nlohmann::json to_json() const;
  static ModelTopology from_json(const nlohmann::json& j);
  bool operator==(const ModelTopology&) const = default;
};

/// The disjoint trainable parameter sets.
enum class ParamGroup : std::uint8_t {
  kAudioEncoder,
  kAudioDecoder,
  kTagEncoder,
  kTagDecoder,
  kAudioProjection,
  kTagProjection,
  kCnnHead,
};

inline constexpr std::array<ParamGroup, 7> kAllParamGroups{
    ParamGroup::kAudioEncoder,    ParamGroup::kAudioDecoder,  ParamGroup::kTagEncoder,
    ParamGroup::kTagDecoder,      ParamGroup::kAudioProjection, ParamGroup::kTagProjection,
    ParamGroup::kCnnHead};

std::string_view group_name(ParamGroup group);

/// conv -> BN -> ReLU -> dropout
struct ConvBlock {
  Conv2d conv;
  BatchNorm norm;
};

/// transposed conv -> BN -> ReLU -> dropout, or transposed conv -> sigmoid
/// for the output block.
struct DeconvBlock {
  ConvTranspose2d deconv;
  BatchNorm norm;
  bool output = false;
};

/// linear -> BN -> ReLU -> dropout, or linear -> sigmoid for the output layer.
struct DenseBlock {
  Linear fc;
  BatchNorm norm;
  bool output = false;
};

/// All networks of the joint model plus the supervised CNN-baseline head.
///
/// Parameters are shared handles, so the model is move-only; snapshot with
/// to_checkpoint() when a copy of the weights is needed.
class CoalaModel {
 public:
  CoalaModel(const ModelTopology& topology, std::uint64_t seed);
  CoalaModel(CoalaModel&&) = default;
  CoalaModel& operator=(CoalaModel&&) = default;
  CoalaModel(const CoalaModel&) = delete;
  CoalaModel& operator=(const CoalaModel&) = delete;

  const ModelTopology& topology() const { return topology_; }

  /// [B,1,P,P] in [0,1] -> Z_a [B,K,P/32,P/32], nonnegative.
  Tensor encode_audio(const Tensor& patches, ForwardContext& ctx);
  /// Z_a -> reconstruction [B,1,P,P] in (0,1).
  Tensor decode_audio(const Tensor& latent, ForwardContext& ctx);
  /// [B,C] multi-hot -> z_t [B,M], nonnegative.
  Tensor encode_tags(const Tensor& tags, ForwardContext& ctx);
  /// z_t -> [B,C] in (0,1).
  Tensor decode_tags(const Tensor& latent, ForwardContext& ctx);

  /// ReLU(AFF_a(flatten(Z_a))). Flattening is channel-major: index
  /// k*side*side + row*side + col, i.e. the row-major layout of Z_a.
  Tensor project_audio(const Tensor& audio_latent);
  Tensor project_tags(const Tensor& tag_latent);

  /// Baseline head on Z_a: linear -> ReLU -> dropout -> linear -> sigmoid.
  Tensor predict_tags(const Tensor& audio_latent, ForwardContext& ctx);

  std::vector<NamedParameter> parameters(ParamGroup group);
  std::vector<NamedParameter> parameters(std::initializer_list<ParamGroup> groups);
  std::size_t parameter_count(ParamGroup group);

  void visit(ParamGroup group, ParameterVisitor& visitor);
  void visit_all(ParameterVisitor& visitor);

  /// Snapshot of every parameter and buffer; topology goes in the trailer
  /// under "topology" alongside `config`.
  Checkpoint to_checkpoint(const nlohmann::json& config = nlohmann::json::object());
  /// Overwrites weights. Throws FormatError naming the first tensor that is
  /// missing or differs in shape, or a topology mismatch.
  void load_checkpoint(const Checkpoint& checkpoint);
  static CoalaModel from_checkpoint(const Checkpoint& checkpoint);

 private:
  Tensor dense_forward(DenseBlock& block, const Tensor& x, ForwardContext& ctx);

  ModelTopology topology_;
  std::vector<ConvBlock> audio_encoder_;
  std::vector<DeconvBlock> audio_decoder_;
  std::vector<DenseBlock> tag_encoder_;
  std::vector<DenseBlock> tag_decoder_;
  Linear audio_projection_;
  Linear tag_projection_;
  Linear cnn_hidden_;
  Linear cnn_output_;
};

}  // namespace coala
