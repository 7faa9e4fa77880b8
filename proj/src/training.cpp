// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include "coala/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "coala/optim.hpp"

namespace coala {

namespace {

constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kDropoutStream = 2;
constexpr std::uint64_t kSplitStream = 3;

Tensor batch_patches(const Dataset& data, std::span<const std::size_t> rows, std::size_t side) {
  std::vector<float> v;
  v.reserve(rows.size() * data.patch_values);
  for (std::size_t r : rows) {
    auto p = data.patch(r);
    v.insert(v.end(), p.begin(), p.end());
  }
  return Tensor({rows.size(), 1, side, side}, std::move(v));
}

Tensor batch_tags(const Dataset& data, std::span<const std::size_t> rows) {
  std::vector<float> v;
  v.reserve(rows.size() * data.num_tags);
  for (std::size_t r : rows) {
    auto t = data.tag_vector(r);
    v.insert(v.end(), t.begin(), t.end());
  }
  return Tensor({rows.size(), data.num_tags}, std::move(v));
}

TotalLoss forward_loss(CoalaModel& model, const Dataset& data, std::span<const std::size_t> rows,
                       const TrainConfig& config, ForwardContext& ctx) {
  BatchTerms terms;
  terms.patches = batch_patches(data, rows, config.topology.patch_size);
  terms.tags = batch_tags(data, rows);
  Tensor za = model.encode_audio(terms.patches, ctx);
  switch (config.mode) {
    case TrainMode::kAeC: {
      terms.reconstruction = model.decode_audio(za, ctx);
      Tensor zt = model.encode_tags(terms.tags, ctx);
      terms.tag_reconstruction = model.decode_tags(zt, ctx);
      terms.audio_projection = model.project_audio(za);
      terms.tag_projection = model.project_tags(zt);
      break;
    }
    case TrainMode::kEC: {
      Tensor zt = model.encode_tags(terms.tags, ctx);
      terms.audio_projection = model.project_audio(za);
      terms.tag_projection = model.project_tags(zt);
      break;
    }
    case TrainMode::kCnn:
      terms.tag_reconstruction = model.predict_tags(za, ctx);
      break;
  }
  return total_loss(terms, config.weights, config.mode, config.denominator);
}

void accumulate(LossBreakdown& sum, const LossBreakdown& x) {
  sum.audio += x.audio;
  sum.tags += x.tags;
  sum.contrastive += x.contrastive;
  sum.total += x.total;
}

LossBreakdown scaled(LossBreakdown b, double n) {
  if (n > 0) {
    b.audio /= n;
    b.tags /= n;
    b.contrastive /= n;
    b.total /= n;
  }
  return b;
}

void check_dataset(const Dataset& data, const TrainConfig& config, const char* what) {
  const std::size_t side = config.topology.patch_size;
  if (data.size() > 0 && data.patch_values != side * side) {
    throw DimensionError(std::string(what) + " patches hold " + std::to_string(data.patch_values) +
                         " values; the model expects " + std::to_string(side) + "x" + std::to_string(side));
  }
  if (data.size() > 0 && data.num_tags != config.topology.num_tags) {
    throw DimensionError(std::string(what) + " tag vectors have " + std::to_string(data.num_tags) +
                         " entries; the model expects " + std::to_string(config.topology.num_tags));
  }
}

}  // namespace

std::size_t TrainConfig::effective_epochs() const {
  if (epochs) return *epochs;
  return mode == TrainMode::kCnn ? 20 : 200;
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw std::invalid_argument("batch_size must be at least 2");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("val_fraction must lie strictly between 0 and 1");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (clip_norm && !(*clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be positive");
  weights.validate();
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j = {{"mode", std::string(to_string(mode))},
                      {"epochs", effective_epochs()},
                      {"batch_size", batch_size},
                      {"learning_rate", learning_rate},
                      {"momentum", momentum},
                      {"seed", seed},
                      {"lambda_a", weights.audio},
                      {"lambda_t", weights.tags},
                      {"lambda_xi", weights.contrastive},
                      {"temperature", weights.temperature},
                      {"contrastive_denominator", std::string(to_string(denominator))},
                      {"val_fraction", val_fraction},
                      {"checkpoint_every", checkpoint_every},
                      {"topology", topology.to_json()}};
  j["clip_norm"] = clip_norm ? nlohmann::json(*clip_norm) : nlohmann::json(nullptr);
  return j;
}

void TrainConfig::merge_json(const nlohmann::json& j) {
  if (j.contains("mode")) mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("epochs")) epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("batch_size")) batch_size = j.at("batch_size").get<std::size_t>();
  if (j.contains("learning_rate")) learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("momentum")) momentum = j.at("momentum").get<double>();
  if (j.contains("clip_norm")) {
    // TOML has no null, so 0 also disables clipping.
    const auto& c = j.at("clip_norm");
    clip_norm = c.is_null() || c.get<double>() == 0.0 ? std::nullopt : std::optional<double>(c.get<double>());
  }
  if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("lambda_a")) weights.audio = j.at("lambda_a").get<double>();
  if (j.contains("lambda_t")) weights.tags = j.at("lambda_t").get<double>();
  if (j.contains("lambda_xi")) weights.contrastive = j.at("lambda_xi").get<double>();
  if (j.contains("temperature")) weights.temperature = j.at("temperature").get<double>();
  if (j.contains("contrastive_denominator")) {
    denominator = parse_denominator(j.at("contrastive_denominator").get<std::string>());
  }
  if (j.contains("val_fraction")) val_fraction = j.at("val_fraction").get<double>();
  if (j.contains("checkpoint_every")) checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
  if (j.contains("topology")) {
    nlohmann::json merged = topology.to_json();
    merged.update(j.at("topology"));
    topology = ModelTopology::from_json(merged);
  }
}

void Dataset::add(const std::string& clip_id, std::span<const float> patch, std::span<const float> tag_bits) {
  if (patch.size() != patch_values) {
    throw DimensionError("patch for '" + clip_id + "' has " + std::to_string(patch.size()) + " values");
  }
  if (clip_ids.empty() && num_tags == 0) num_tags = tag_bits.size();
  if (tag_bits.size() != num_tags) {
    throw DimensionError("tag vector for '" + clip_id + "' has " + std::to_string(tag_bits.size()) +
                         " entries, expected " + std::to_string(num_tags));
  }
  clip_ids.push_back(clip_id);
  patches.insert(patches.end(), patch.begin(), patch.end());
  tags.insert(tags.end(), tag_bits.begin(), tag_bits.end());
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.patch_values = patch_values;
  out.num_tags = num_tags;
  for (std::size_t i : indices) out.add(clip_ids.at(i), patch(i), tag_vector(i));
  return out;
}

Dataset build_dataset(const std::vector<SpectrogramPatch>& patches,
                      const std::vector<ManifestEntry>& manifest, const Vocabulary& vocab,
                      std::size_t* discarded) {
  std::unordered_map<std::string, const ManifestEntry*> by_id;
  for (const auto& e : manifest) by_id.emplace(e.clip_id, &e);
  Dataset data;
  data.num_tags = vocab.size();
  std::size_t dropped = 0;
  for (const auto& p : patches) {
    auto it = by_id.find(p.clip_id);
    if (it == by_id.end()) throw FormatError("patch clip '" + p.clip_id + "' is not in the manifest");
    auto bits = encode(it->second->tags, vocab);
    if (!bits) {
      ++dropped;
      continue;
    }
    data.add(p.clip_id, p.values, multi_hot(*bits, vocab.size()));
  }
  if (discarded) *discarded = dropped;
  return data;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("val_fraction must lie strictly between 0 and 1");
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(seed).fork(kSplitStream);
  rng.shuffle(std::span(order));
  const auto n_val = static_cast<std::size_t>(std::llround(dataset.size() * val_fraction));
  std::vector<std::size_t> val(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> tr(order.begin() + n_val, order.end());
  std::sort(val.begin(), val.end());
  std::sort(tr.begin(), tr.end());
  return {dataset.subset(tr), dataset.subset(val)};
}

std::vector<ParamGroup> trained_groups(TrainMode mode) {
  switch (mode) {
    case TrainMode::kAeC:
      return {ParamGroup::kAudioEncoder, ParamGroup::kAudioDecoder,    ParamGroup::kTagEncoder,
              ParamGroup::kTagDecoder,   ParamGroup::kAudioProjection, ParamGroup::kTagProjection};
    case TrainMode::kEC:
      return {ParamGroup::kAudioEncoder, ParamGroup::kAudioProjection, ParamGroup::kTagEncoder,
              ParamGroup::kTagProjection};
    case TrainMode::kCnn:
      return {ParamGroup::kAudioEncoder, ParamGroup::kCnnHead};
  }
  return {};
}

LossBreakdown evaluate_losses(CoalaModel& model, const Dataset& data, const TrainConfig& config) {
  NoGradGuard no_grad;
  ForwardContext ctx{false, nullptr};
  LossBreakdown sum;
  std::size_t batches = 0;
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < data.size(); start += config.batch_size) {
    const std::size_t end = std::min(data.size(), start + config.batch_size);
    if (end - start < 2) break;
    rows.resize(end - start);
    std::iota(rows.begin(), rows.end(), start);
    accumulate(sum, forward_loss(model, data, rows, config, ctx).breakdown);
    ++batches;
  }
  return scaled(sum, static_cast<double>(batches));
}

TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.validate();
  check_dataset(train_set, config, "training");
  check_dataset(val_set, config, "validation");
  if (train_set.size() < config.batch_size) {
    throw std::invalid_argument("training set has " + std::to_string(train_set.size()) +
                                " records, fewer than one batch of " + std::to_string(config.batch_size));
  }

  CoalaModel model(config.topology, config.seed);
  Rng root(config.seed);
  Rng shuffle_rng = root.fork(kShuffleStream);
  Rng dropout_rng = root.fork(kDropoutStream);

  std::vector<NamedParameter> params;
  for (ParamGroup g : trained_groups(config.mode)) {
    auto p = model.parameters(g);
    params.insert(params.end(), p.begin(), p.end());
  }
  Sgd optimizer(params, SgdOptions{config.learning_rate, config.momentum, config.clip_norm});

  const nlohmann::json config_json = config.to_json();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t steps_per_epoch = train_set.size() / config.batch_size;
  const bool validate = val_set.size() >= 2;

  TrainResult result{std::move(model), {}, {}, 0, 0, {}};
  double best_score = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= config.effective_epochs(); ++epoch) {
    shuffle_rng.shuffle(std::span(order));
    LossBreakdown epoch_sum;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      std::span<const std::size_t> rows(order.data() + s * config.batch_size, config.batch_size);
      try {
        ForwardContext ctx{true, &dropout_rng};
        TotalLoss loss = forward_loss(result.model, train_set, rows, config, ctx);
        loss.value.backward();
        optimizer.step();
        accumulate(epoch_sum, loss.breakdown);
        ++result.total_steps;
        if (hooks.log) {
          nlohmann::json line = loss.breakdown.to_json();
          line["step"] = result.total_steps;
          line["epoch"] = epoch;
          line["grad_norm"] = optimizer.last_grad_norm();
          hooks.log(line);
        }
      } catch (const NumericalError& e) {
        optimizer.zero_grad();
        nlohmann::json diagnostic = {{"error", e.what()},
                                     {"epoch", epoch},
                                     {"batch", s},
                                     {"step", result.total_steps + 1},
                                     {"clip_ids", nlohmann::json::array()}};
        for (std::size_t r : rows) diagnostic["clip_ids"].push_back(train_set.clip_ids[r]);
        nlohmann::json trailer = config_json;
        trailer["epoch"] = epoch - 1;
        throw TrainingAborted("non-finite value at epoch " + std::to_string(epoch) + ", batch " +
                                  std::to_string(s) + ": " + e.what(),
                              std::move(diagnostic), result.model.to_checkpoint(trailer));
      }
    }

    EpochSummary summary;
    summary.epoch = epoch;
    summary.steps = steps_per_epoch;
    summary.train = scaled(epoch_sum, static_cast<double>(steps_per_epoch));
    if (validate) summary.validation = evaluate_losses(result.model, val_set, config);
    const double score = summary.validation ? summary.validation->total : summary.train.total;

    nlohmann::json trailer = config_json;
    trailer["epoch"] = epoch;
    if (std::isfinite(score) && score < best_score) {
      best_score = score;
      result.best_epoch = epoch;
      trailer["best_epoch"] = epoch;
      result.best = result.model.to_checkpoint(trailer);
    }
    if (hooks.log) {
      nlohmann::json line = {{"epoch", epoch}, {"steps", steps_per_epoch}, {"train", summary.train.to_json()}};
      if (summary.validation) line["validation"] = summary.validation->to_json();
      hooks.log(line);
    }
    result.history.push_back(summary);
    if (hooks.on_epoch) hooks.on_epoch(summary, result.model);
  }

  nlohmann::json trailer = config_json;
  trailer["epoch"] = config.effective_epochs();
  result.last = result.model.to_checkpoint(trailer);
  if (result.best.entries.empty()) result.best = result.last;
  return result;
}

double retrieval_top1(CoalaModel& model, const Dataset& data, std::size_t batch_size) {
  if (batch_size < 2 || data.size() < batch_size) {
    throw std::invalid_argument("retrieval needs at least one batch of " + std::to_string(batch_size));
  }
  NoGradGuard no_grad;
  ForwardContext ctx{false, nullptr};
  std::size_t hits = 0, queries = 0;
  std::vector<std::size_t> rows(batch_size);
  for (std::size_t start = 0; start + batch_size <= data.size(); start += batch_size) {
    std::iota(rows.begin(), rows.end(), start);
    Tensor phi_a = model.project_audio(model.encode_audio(batch_patches(data, rows, model.topology().patch_size), ctx));
    Tensor phi_t = model.project_tags(model.encode_tags(batch_tags(data, rows), ctx));
    const auto sims = cosine_similarity_matrix(phi_a, phi_t);
    for (std::size_t b = 0; b < batch_size; ++b) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < batch_size; ++i) {
        if (sims[b * batch_size + i] > sims[b * batch_size + best]) best = i;
      }
      auto want = data.tag_vector(rows[b]);
      auto got = data.tag_vector(rows[best]);
      if (std::equal(want.begin(), want.end(), got.begin())) ++hits;
      ++queries;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(queries);
}

std::vector<float> extract_embeddings(CoalaModel& model, std::span<const float> patches, std::size_t count) {
  const std::size_t side = model.topology().patch_size;
  const std::size_t per = side * side;
  if (patches.size() != count * per) {
    throw DimensionError("extract_embeddings: " + std::to_string(patches.size()) + " values for " +
                         std::to_string(count) + " patches of " + std::to_string(per));
  }
  NoGradGuard no_grad;
  ForwardContext ctx{false, nullptr};
  const std::size_t dim = model.topology().audio_latent();
  std::vector<float> out(count * dim);
  constexpr std::size_t kChunk = 32;
  for (std::size_t start = 0; start < count; start += kChunk) {
    const std::size_t n = std::min(kChunk, count - start);
    Tensor x({n, 1, side, side},
             std::vector<float>(patches.begin() + start * per, patches.begin() + (start + n) * per));
    Tensor z = model.encode_audio(x, ctx);
    std::copy(z.data().begin(), z.data().end(), out.begin() + start * dim);
  }
  return out;
}

TrainResult train_to_directory(const Dataset& train_set, const Dataset& val_set,
                               const TrainConfig& config, const std::filesystem::path& out_dir,
                               const std::function<void(const EpochSummary&)>& progress) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream cfg(out_dir / "config.json");
    cfg << config.to_json().dump(2) << '\n';
  }
  std::ofstream log(out_dir / "log.jsonl");
  TrainHooks hooks;
  hooks.log = [&log](const nlohmann::json& line) { log << line.dump() << '\n' << std::flush; };
  hooks.on_epoch = [&](const EpochSummary& s, CoalaModel& model) {
    if (config.checkpoint_every > 0 && s.epoch % config.checkpoint_every == 0) {
      nlohmann::json trailer = config.to_json();
      trailer["epoch"] = s.epoch;
      save_checkpoint(out_dir / ("epoch_" + std::to_string(s.epoch) + ".ckpt"), model.to_checkpoint(trailer));
    }
    if (progress) progress(s);
  };
  try {
    TrainResult result = train(train_set, val_set, config, hooks);
    save_checkpoint(out_dir / "best.ckpt", result.best);
    save_checkpoint(out_dir / "last.ckpt", result.last);
    return result;
  } catch (const TrainingAborted& e) {
    save_checkpoint(out_dir / "last-good.ckpt", e.last_good);
    std::ofstream dump(out_dir / "nonfinite.json");
    dump << e.diagnostic.dump(2) << '\n';
    throw;
  }
}

}  // namespace coala
