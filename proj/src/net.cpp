// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include "coala/net.hpp"

#include <map>

namespace coala {

namespace {

Tensor block_activation(const Tensor& x, double rate, ForwardContext& ctx) {
  Tensor h = relu(x);
  if (!ctx.training || rate == 0.0) return h;
  if (ctx.rng == nullptr) throw std::logic_error("training forward pass needs an Rng");
  return dropout(h, rate, true, *ctx.rng);
}

class CollectParameters : public ParameterVisitor {
 public:
  void parameter(const std::string& name, Tensor& tensor) override {
    params.push_back({name, tensor});
  }
  void buffer(const std::string&, std::vector<float>&) override {}
  std::vector<NamedParameter> params;
};

class SnapshotVisitor : public ParameterVisitor {
 public:
  void parameter(const std::string& name, Tensor& tensor) override {
    entries.push_back({name, tensor.shape(), {tensor.data().begin(), tensor.data().end()}});
  }
  void buffer(const std::string& name, std::vector<float>& values) override {
    entries.push_back({name, Shape{values.size()}, values});
  }
  std::vector<CheckpointEntry> entries;
};

class RestoreVisitor : public ParameterVisitor {
 public:
  explicit RestoreVisitor(const Checkpoint& checkpoint) {
    for (const auto& e : checkpoint.entries) by_name.emplace(e.name, &e);
  }
  void parameter(const std::string& name, Tensor& tensor) override {
    const auto& e = lookup(name, tensor.shape());
    std::copy(e.values.begin(), e.values.end(), tensor.mutable_data().begin());
  }
  void buffer(const std::string& name, std::vector<float>& values) override {
    const auto& e = lookup(name, Shape{values.size()});
    values = e.values;
  }

 private:
  const CheckpointEntry& lookup(const std::string& name, const Shape& expected) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
    if (it->second->shape != expected) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " +
                        shape_to_string(it->second->shape) + ", model expects " +
                        shape_to_string(expected));
    }
    return *it->second;
  }
  std::map<std::string, const CheckpointEntry*> by_name;
};

}  // namespace

std::size_t ModelTopology::latent_side() const {
  std::size_t side = patch_size;
  for (std::size_t i = 0; i < conv_blocks; ++i) side = conv_output_size(side, kernel, stride, padding);
  return side;
}

std::size_t ModelTopology::audio_latent() const {
  const std::size_t side = latent_side();
  return channels * side * side;
}

nlohmann::json ModelTopology::to_json() const {
  return {{"patch_size", patch_size}, {"conv_blocks", conv_blocks}, {"channels", channels},
          {"kernel", kernel},         {"stride", stride},           {"padding", padding},
          {"num_tags", num_tags},     {"tag_hidden", tag_hidden},   {"tag_latent", tag_latent},
          {"projection", projection}, {"cnn_hidden", cnn_hidden},   {"dropout", dropout}};
}

ModelTopology ModelTopology::from_json(const nlohmann::json& j) {
  ModelTopology t;
  t.patch_size = j.at("patch_size").get<std::size_t>();
  t.conv_blocks = j.at("conv_blocks").get<std::size_t>();
  t.channels = j.at("channels").get<std::size_t>();
  t.kernel = j.at("kernel").get<std::size_t>();
  t.stride = j.at("stride").get<std::size_t>();
  t.padding = j.at("padding").get<std::size_t>();
  t.num_tags = j.at("num_tags").get<std::size_t>();
  t.tag_hidden = j.at("tag_hidden").get<std::size_t>();
  t.tag_latent = j.at("tag_latent").get<std::size_t>();
  t.projection = j.at("projection").get<std::size_t>();
  t.cnn_hidden = j.at("cnn_hidden").get<std::size_t>();
  t.dropout = j.at("dropout").get<double>();
  return t;
}

std::string_view group_name(ParamGroup group) {
  switch (group) {
    case ParamGroup::kAudioEncoder: return "audio_encoder";
    case ParamGroup::kAudioDecoder: return "audio_decoder";
    case ParamGroup::kTagEncoder: return "tag_encoder";
    case ParamGroup::kTagDecoder: return "tag_decoder";
    case ParamGroup::kAudioProjection: return "audio_projection";
    case ParamGroup::kTagProjection: return "tag_projection";
    case ParamGroup::kCnnHead: return "cnn_head";
  }
  return "unknown";
}

CoalaModel::CoalaModel(const ModelTopology& topology, std::uint64_t seed) : topology_(topology) {
  if (topology_.conv_blocks == 0 || topology_.num_tags == 0) {
    throw std::invalid_argument("model topology needs at least one conv block and one tag");
  }
  // One child stream per group: a group's initial weights do not depend on
  // which other groups exist.
  Rng root(seed);
  std::vector<Rng> streams;
  for (std::size_t i = 0; i < kAllParamGroups.size(); ++i) streams.push_back(root.fork(i));

  const std::size_t k = topology_.channels;
  auto& enc_rng = streams[static_cast<std::size_t>(ParamGroup::kAudioEncoder)];
  for (std::size_t i = 0; i < topology_.conv_blocks; ++i) {
    audio_encoder_.push_back({Conv2d(i == 0 ? 1 : k, k, topology_.kernel, topology_.stride,
                                     topology_.padding, enc_rng),
                              BatchNorm(k)});
  }
  auto& dec_rng = streams[static_cast<std::size_t>(ParamGroup::kAudioDecoder)];
  for (std::size_t i = 0; i < topology_.conv_blocks; ++i) {
    const bool last = i + 1 == topology_.conv_blocks;
    DeconvBlock block{ConvTranspose2d(k, last ? 1 : k, topology_.kernel, topology_.stride,
                                      topology_.padding, dec_rng),
                      last ? BatchNorm() : BatchNorm(k), last};
    audio_decoder_.push_back(std::move(block));
  }

  auto& tenc_rng = streams[static_cast<std::size_t>(ParamGroup::kTagEncoder)];
  const std::array<std::size_t, 4> enc_sizes{topology_.num_tags, topology_.tag_hidden,
                                             topology_.tag_hidden, topology_.tag_latent};
  for (std::size_t i = 0; i + 1 < enc_sizes.size(); ++i) {
    tag_encoder_.push_back({Linear(enc_sizes[i], enc_sizes[i + 1], tenc_rng),
                            BatchNorm(enc_sizes[i + 1]), false});
  }
  auto& tdec_rng = streams[static_cast<std::size_t>(ParamGroup::kTagDecoder)];
  const std::array<std::size_t, 4> dec_sizes{topology_.tag_latent, topology_.tag_hidden,
                                             topology_.tag_hidden, topology_.num_tags};
  for (std::size_t i = 0; i + 1 < dec_sizes.size(); ++i) {
    const bool last = i + 2 == dec_sizes.size();
    tag_decoder_.push_back({Linear(dec_sizes[i], dec_sizes[i + 1], tdec_rng),
                            last ? BatchNorm() : BatchNorm(dec_sizes[i + 1]), last});
  }

  audio_projection_ = Linear(topology_.audio_latent(), topology_.projection,
                             streams[static_cast<std::size_t>(ParamGroup::kAudioProjection)]);
  tag_projection_ = Linear(topology_.tag_latent, topology_.projection,
                           streams[static_cast<std::size_t>(ParamGroup::kTagProjection)]);
  auto& cnn_rng = streams[static_cast<std::size_t>(ParamGroup::kCnnHead)];
  cnn_hidden_ = Linear(topology_.audio_latent(), topology_.cnn_hidden, cnn_rng);
  cnn_output_ = Linear(topology_.cnn_hidden, topology_.num_tags, cnn_rng);
}

Tensor CoalaModel::encode_audio(const Tensor& patches, ForwardContext& ctx) {
  const std::size_t p = topology_.patch_size;
  if (patches.rank() != 4 || patches.dim(1) != 1 || patches.dim(2) != p || patches.dim(3) != p) {
    throw DimensionError("encode_audio: expected [B,1," + std::to_string(p) + "," +
                         std::to_string(p) + "], got " + shape_to_string(patches.shape()));
  }
  Tensor h = patches;
  for (auto& block : audio_encoder_) {
    h = block_activation(block.norm(block.conv(h), ctx.training), topology_.dropout, ctx);
  }
  return h;
}

Tensor CoalaModel::decode_audio(const Tensor& latent, ForwardContext& ctx) {
  const std::size_t side = topology_.latent_side();
  if (latent.rank() != 4 || latent.dim(1) != topology_.channels || latent.dim(2) != side ||
      latent.dim(3) != side) {
    throw DimensionError("decode_audio: expected [B," + std::to_string(topology_.channels) + "," +
                         std::to_string(side) + "," + std::to_string(side) + "], got " +
                         shape_to_string(latent.shape()));
  }
  Tensor h = latent;
  for (auto& block : audio_decoder_) {
    h = block.deconv(h);
    h = block.output ? sigmoid(h) : block_activation(block.norm(h, ctx.training), topology_.dropout, ctx);
  }
  return h;
}

Tensor CoalaModel::dense_forward(DenseBlock& block, const Tensor& x, ForwardContext& ctx) {
  Tensor h = block.fc(x);
  return block.output ? sigmoid(h) : block_activation(block.norm(h, ctx.training), topology_.dropout, ctx);
}

Tensor CoalaModel::encode_tags(const Tensor& tags, ForwardContext& ctx) {
  if (tags.rank() != 2 || tags.dim(1) != topology_.num_tags) {
    throw DimensionError("encode_tags: expected [B," + std::to_string(topology_.num_tags) +
                         "], got " + shape_to_string(tags.shape()));
  }
  Tensor h = tags;
  for (auto& block : tag_encoder_) h = dense_forward(block, h, ctx);
  return h;
}

Tensor CoalaModel::decode_tags(const Tensor& latent, ForwardContext& ctx) {
  if (latent.rank() != 2 || latent.dim(1) != topology_.tag_latent) {
    throw DimensionError("decode_tags: expected [B," + std::to_string(topology_.tag_latent) +
                         "], got " + shape_to_string(latent.shape()));
  }
  Tensor h = latent;
  for (auto& block : tag_decoder_) h = dense_forward(block, h, ctx);
  return h;
}

Tensor CoalaModel::project_audio(const Tensor& audio_latent) {
  const std::size_t batch = audio_latent.dim(0);
  Tensor flat = reshape(audio_latent, Shape{batch, audio_latent.numel() / batch});
  return relu(audio_projection_(flat));
}

Tensor CoalaModel::project_tags(const Tensor& tag_latent) { return relu(tag_projection_(tag_latent)); }

Tensor CoalaModel::predict_tags(const Tensor& audio_latent, ForwardContext& ctx) {
  const std::size_t batch = audio_latent.dim(0);
  Tensor flat = reshape(audio_latent, Shape{batch, audio_latent.numel() / batch});
  Tensor h = block_activation(cnn_hidden_(flat), topology_.dropout, ctx);
  return sigmoid(cnn_output_(h));
}

void CoalaModel::visit(ParamGroup group, ParameterVisitor& visitor) {
  const std::string root(group_name(group));
  switch (group) {
    case ParamGroup::kAudioEncoder:
      for (std::size_t i = 0; i < audio_encoder_.size(); ++i) {
        const std::string prefix = root + "." + std::to_string(i);
        audio_encoder_[i].conv.visit(prefix + ".conv", visitor);
        audio_encoder_[i].norm.visit(prefix + ".bn", visitor);
      }
      break;
    case ParamGroup::kAudioDecoder:
      for (std::size_t i = 0; i < audio_decoder_.size(); ++i) {
        const std::string prefix = root + "." + std::to_string(i);
        audio_decoder_[i].deconv.visit(prefix + ".deconv", visitor);
        if (!audio_decoder_[i].output) audio_decoder_[i].norm.visit(prefix + ".bn", visitor);
      }
      break;
    case ParamGroup::kTagEncoder:
    case ParamGroup::kTagDecoder: {
      auto& blocks = group == ParamGroup::kTagEncoder ? tag_encoder_ : tag_decoder_;
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string prefix = root + "." + std::to_string(i);
        blocks[i].fc.visit(prefix + ".fc", visitor);
        if (!blocks[i].output) blocks[i].norm.visit(prefix + ".bn", visitor);
      }
      break;
    }
    case ParamGroup::kAudioProjection:
      audio_projection_.visit(root + ".fc", visitor);
      break;
    case ParamGroup::kTagProjection:
      tag_projection_.visit(root + ".fc", visitor);
      break;
    case ParamGroup::kCnnHead:
      cnn_hidden_.visit(root + ".hidden", visitor);
      cnn_output_.visit(root + ".output", visitor);
      break;
  }
}

void CoalaModel::visit_all(ParameterVisitor& visitor) {
  for (ParamGroup g : kAllParamGroups) visit(g, visitor);
}

std::vector<NamedParameter> CoalaModel::parameters(ParamGroup group) {
  CollectParameters collect;
  visit(group, collect);
  return std::move(collect.params);
}

std::vector<NamedParameter> CoalaModel::parameters(std::initializer_list<ParamGroup> groups) {
  CollectParameters collect;
  for (ParamGroup g : groups) visit(g, collect);
  return std::move(collect.params);
}

std::size_t CoalaModel::parameter_count(ParamGroup group) {
  std::size_t n = 0;
  for (const auto& p : parameters(group)) n += p.tensor.numel();
  return n;
}

Checkpoint CoalaModel::to_checkpoint(const nlohmann::json& config) {
  SnapshotVisitor snapshot;
  visit_all(snapshot);
  Checkpoint checkpoint;
  checkpoint.entries = std::move(snapshot.entries);
  checkpoint.config = config;
  checkpoint.config["topology"] = topology_.to_json();
  return checkpoint;
}

void CoalaModel::load_checkpoint(const Checkpoint& checkpoint) {
  if (checkpoint.config.contains("topology")) {
    const auto stored = ModelTopology::from_json(checkpoint.config.at("topology"));
    if (!(stored == topology_)) {
      throw FormatError("checkpoint topology " + checkpoint.config.at("topology").dump() +
                        " differs from model topology " + topology_.to_json().dump());
    }
  }
  RestoreVisitor restore(checkpoint);
  visit_all(restore);
}

CoalaModel CoalaModel::from_checkpoint(const Checkpoint& checkpoint) {
  if (!checkpoint.config.contains("topology")) {
    throw FormatError("checkpoint trailer has no topology");
  }
  CoalaModel model(ModelTopology::from_json(checkpoint.config.at("topology")), 0);
  model.load_checkpoint(checkpoint);
  return model;
}

}  // namespace coala
