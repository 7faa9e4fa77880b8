// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include "coala/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>

#include "coala/nn.hpp"
#include "coala/objectives.hpp"
#include "coala/optim.hpp"
#include "coala/training.hpp"

namespace coala {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

const std::vector<std::string>& distractor_pool() {
  static const std::vector<std::string> pool{"studio", "field-recording", "processed", "mono",
                                             "stereo", "loops",           "effects",   "digital"};
  return pool;
}

// Fixed per-concept components so that clips of one concept differ only by
// their frequency jitter and noise.
struct ConceptVoice {
  std::vector<double> ratios;
  std::vector<double> phases;
};

ConceptVoice concept_voice(std::size_t concept_id) {
  Rng rng(0xC0A1A000ULL + concept_id);
  ConceptVoice v;
  for (int i = 0; i < 24; ++i) {
    v.ratios.push_back(std::exp2(rng.uniform(-0.5, 0.5)));
    v.phases.push_back(rng.uniform(0.0, kTwoPi));
  }
  return v;
}

// Smooth 10 ms gate.
double gate(double t, double period, double on) {
  const double ph = std::fmod(t, period);
  constexpr double ramp = 0.01;
  if (ph >= on) return 0.0;
  return std::min({1.0, ph / ramp, (on - ph) / ramp});
}

std::vector<float> render(const Concept& c, const ConceptVoice& voice, double hz, std::size_t n,
                          double rate) {
  std::vector<double> x(n, 0.0);
  switch (c.family) {
    case WaveFamily::kNoiseBurst:
      for (std::size_t i = 0; i < n; ++i) {
        const double t = i / rate;
        double s = 0.0;
        for (std::size_t k = 0; k < voice.ratios.size(); ++k) {
          s += std::sin(kTwoPi * hz * voice.ratios[k] * t + voice.phases[k]);
        }
        x[i] = s * gate(t, 0.6, 0.25);
      }
      break;
    case WaveFamily::kSineChord: {
      const double notes[] = {1.0, 1.2599, 1.4983};
      for (std::size_t i = 0; i < n; ++i) {
        const double t = i / rate;
        const double env = std::exp(-std::fmod(t, 1.0) / 0.4);
        double s = 0.0;
        for (double r : notes) {
          s += std::sin(kTwoPi * hz * r * t) + 0.5 * std::sin(kTwoPi * 2.0 * hz * r * t);
        }
        x[i] = env * s;
      }
      break;
    }
    case WaveFamily::kAmTone:
      for (std::size_t i = 0; i < n; ++i) {
        const double t = i / rate;
        const double carrier = std::sin(kTwoPi * hz * t) + 0.5 * std::sin(kTwoPi * 2 * hz * t) +
                               0.25 * std::sin(kTwoPi * 3 * hz * t);
        x[i] = carrier * (1.0 + 0.9 * std::sin(kTwoPi * 6.0 * t));
      }
      break;
    case WaveFamily::kSweep: {
      // Exponential sweep from hz/2 to 2*hz, restarting every 1.5 s.
      constexpr double period = 1.5;
      const double k = std::log(4.0) / period;
      for (std::size_t i = 0; i < n; ++i) {
        const double tau = std::fmod(i / rate, period);
        const double phase = kTwoPi * (hz / 2.0) * (std::exp(k * tau) - 1.0) / k;
        x[i] = std::sin(phase) * std::min(1.0, tau / 0.01);
      }
      break;
    }
  }
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(peak > 0 ? 0.5 * x[i] / peak : 0.0);
  return out;
}

}  // namespace

const std::vector<Concept>& synthetic_concepts() {
  static const std::vector<Concept> concepts{
      {WaveFamily::kNoiseBurst, 1500.0, {"noise", "bursts", "hiss"}},
      {WaveFamily::kSineChord, 330.0, {"chords", "harmony", "tonal"}},
      {WaveFamily::kAmTone, 600.0, {"tremolo", "tones", "hum"}},
      {WaveFamily::kSweep, 800.0, {"sweeps", "chirp", "rising"}},
      {WaveFamily::kNoiseBurst, 5000.0, {"static", "crackles"}},
      {WaveFamily::kAmTone, 2500.0, {"beeps", "alarm"}},
  };
  return concepts;
}

void SyntheticCorpusSpec::validate() const {
  if (num_concepts < 1 || num_concepts > synthetic_concepts().size()) {
    throw std::invalid_argument("num_concepts must lie in [1, " + std::to_string(synthetic_concepts().size()) + "]");
  }
  if (num_clips < num_concepts) throw std::invalid_argument("num_clips must be at least num_concepts");
  if (noise_level < 0.0) throw std::invalid_argument("noise_level must be nonnegative");
  if (jitter_octaves < 0.0) throw std::invalid_argument("jitter_octaves must be nonnegative");
  if (distractor_rate < 0.0 || distractor_rate > 1.0) throw std::invalid_argument("distractor_rate must lie in [0, 1]");
  if (test_fraction < 0.0 || test_fraction >= 1.0) throw std::invalid_argument("test_fraction must lie in [0, 1)");
  if (!(seconds > 0.0)) throw std::invalid_argument("seconds must be positive");
}

nlohmann::json SyntheticCorpusSpec::to_json() const {
  return {{"num_clips", num_clips},         {"num_concepts", num_concepts},
          {"noise_level", noise_level},     {"jitter_octaves", jitter_octaves},
          {"distractor_rate", distractor_rate}, {"test_fraction", test_fraction},
          {"seconds", seconds},             {"seed", seed}};
}

void SyntheticCorpusSpec::merge_json(const nlohmann::json& j) {
  if (j.contains("num_clips")) num_clips = j.at("num_clips").get<std::size_t>();
  if (j.contains("num_concepts")) num_concepts = j.at("num_concepts").get<std::size_t>();
  if (j.contains("noise_level")) noise_level = j.at("noise_level").get<double>();
  if (j.contains("jitter_octaves")) jitter_octaves = j.at("jitter_octaves").get<double>();
  if (j.contains("distractor_rate")) distractor_rate = j.at("distractor_rate").get<double>();
  if (j.contains("test_fraction")) test_fraction = j.at("test_fraction").get<double>();
  if (j.contains("seconds")) seconds = j.at("seconds").get<double>();
  if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
}

SyntheticCorpus synthesize_corpus(const SyntheticCorpusSpec& spec) {
  spec.validate();
  const auto& concepts = synthetic_concepts();
  std::vector<ConceptVoice> voices;
  for (std::size_t c = 0; c < spec.num_concepts; ++c) voices.push_back(concept_voice(c));

  SyntheticCorpus corpus;
  Rng root(spec.seed);
  const auto n = static_cast<std::size_t>(spec.seconds * kSampleRate);
  for (std::size_t i = 0; i < spec.num_clips; ++i) {
    Rng rng = root.fork(i);
    const std::size_t c = i % spec.num_concepts;
    const std::size_t k = i / spec.num_concepts;
    const double jitter = rng.uniform(-spec.jitter_octaves, spec.jitter_octaves);

    AudioClip clip;
    clip.sample_rate = kSampleRate;
    clip.samples = render(concepts[c], voices[c], concepts[c].base_hz * std::exp2(jitter), n, kSampleRate);
    for (float& s : clip.samples) {
      s = static_cast<float>(std::clamp(s + spec.noise_level * rng.normal(), -1.0, 1.0));
    }

    char name[32];
    std::snprintf(name, sizeof name, "clips/clip_%04zu.wav", i);
    ManifestEntry entry{name, name, concepts[c].tags};
    entry.tags.push_back(jitter < 0.0 ? "low" : "high");
    if (rng.uniform() < spec.distractor_rate) {
      entry.tags.push_back(distractor_pool()[rng.below(distractor_pool().size())]);
    }
    entry.tags.push_back("sound");

    const bool test = std::floor((k + 1) * spec.test_fraction) > std::floor(k * spec.test_fraction);
    corpus.labels.push_back({name, static_cast<int>(c), test ? "test" : "train"});
    corpus.manifest.push_back(std::move(entry));
    corpus.clips.push_back(std::move(clip));
  }
  return corpus;
}

void write_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus,
                  const SyntheticCorpusSpec& spec) {
  std::filesystem::create_directories(dir / "clips");
  for (std::size_t i = 0; i < corpus.clips.size(); ++i) {
    write_wav(dir / corpus.manifest[i].clip_id, corpus.clips[i]);
  }
  write_manifest(dir / "manifest.tsv", corpus.manifest);
  write_labels(dir / "labels.tsv", corpus.labels);
  std::ofstream(dir / "spec.json") << spec.to_json().dump(2) << '\n';
}

std::vector<SpectrogramPatch> clip_patches(const AudioClip& conformed, const std::string& clip_id) {
  Matrix mel = logmel(conformed);
  if (mel.rows < kPatchFrames) {
    Matrix padded(kPatchFrames, kMelBands, static_cast<float>(std::log10(kLogFloor)));
    std::copy(mel.values.begin(), mel.values.end(), padded.values.begin());
    mel = std::move(padded);
  }
  std::vector<SpectrogramPatch> patches;
  for (std::size_t offset = 0; offset + kPatchFrames <= mel.rows; offset += kPatchFrames) {
    SpectrogramPatch p;
    p.clip_id = clip_id;
    p.frame_offset = static_cast<std::uint32_t>(offset);
    p.values.assign(mel.values.begin() + offset * mel.cols, mel.values.begin() + (offset + kPatchFrames) * mel.cols);
    minmax_scale(p.values);
    patches.push_back(std::move(p));
  }
  return patches;
}

std::vector<float> embedding_feature(CoalaModel& model, const AudioClip& conformed) {
  const auto patches = clip_patches(conformed);
  std::vector<float> flat;
  for (const auto& p : patches) flat.insert(flat.end(), p.values.begin(), p.values.end());
  const std::vector<float> emb = extract_embeddings(model, flat, patches.size());
  const std::size_t dim = model.topology().audio_latent();
  std::vector<double> acc(dim, 0.0);
  for (std::size_t r = 0; r < patches.size(); ++r)
    for (std::size_t d = 0; d < dim; ++d) acc[d] += emb[r * dim + d];
  std::vector<float> out(dim);
  for (std::size_t d = 0; d < dim; ++d) out[d] = static_cast<float>(acc[d] / patches.size());
  return out;
}

std::vector<float> mfcc_feature(const AudioClip& conformed) {
  const AcousticDescriptors d = descriptors(conformed);
  std::vector<float> means, stds;
  for (const Matrix* m : {&d.mfcc, &d.mfcc_delta, &d.mfcc_delta2}) {
    for (std::size_t r = 0; r < m->rows; ++r) {
      double s = 0.0, ss = 0.0;
      for (float v : m->row(r)) s += v;
      const double mean = s / m->cols;
      for (float v : m->row(r)) ss += (v - mean) * (v - mean);
      means.push_back(static_cast<float>(mean));
      stds.push_back(static_cast<float>(std::sqrt(ss / m->cols)));
    }
  }
  means.insert(means.end(), stds.begin(), stds.end());
  return means;
}

Standardizer Standardizer::fit(const std::vector<std::vector<float>>& train) {
  if (train.empty()) throw std::invalid_argument("cannot standardise with an empty training split");
  const std::size_t dim = train.front().size();
  Standardizer s;
  s.mean.assign(dim, 0.0);
  s.stddev.assign(dim, 0.0);
  for (const auto& x : train)
    for (std::size_t d = 0; d < dim; ++d) s.mean[d] += x[d];
  for (double& m : s.mean) m /= train.size();
  for (const auto& x : train)
    for (std::size_t d = 0; d < dim; ++d) s.stddev[d] += (x[d] - s.mean[d]) * (x[d] - s.mean[d]);
  for (double& v : s.stddev) v = std::sqrt(v / train.size());
  return s;
}

std::vector<float> Standardizer::apply(const std::vector<float>& x) const {
  if (x.size() != mean.size()) throw DimensionError("standardize: feature dimension mismatch");
  std::vector<float> out(x.size());
  for (std::size_t d = 0; d < x.size(); ++d) {
    out[d] = stddev[d] > 0.0 ? static_cast<float>((x[d] - mean[d]) / stddev[d]) : 0.0f;
  }
  return out;
}

nlohmann::json ClassificationReport::to_json() const {
  return {{"mean_accuracy", mean_accuracy}, {"std_accuracy", std_accuracy}, {"accuracies", accuracies}};
}

double train_and_score_mlp(const std::vector<std::vector<float>>& train_x, const std::vector<int>& train_y,
                           const std::vector<std::vector<float>>& test_x, const std::vector<int>& test_y,
                           std::size_t num_classes, const MlpConfig& config, std::uint64_t seed) {
  const std::size_t dim = train_x.front().size();
  Rng rng(seed);
  Rng init = rng.fork(0);
  Rng order_rng = rng.fork(1);
  Linear hidden(dim, config.hidden, init);
  Linear output(config.hidden, num_classes, init);
  std::vector<NamedParameter> params{{"hidden.weight", hidden.weight}, {"hidden.bias", hidden.bias},
                                     {"output.weight", output.weight}, {"output.bias", output.bias}};
  Sgd opt(params, SgdOptions{config.learning_rate, config.momentum, std::nullopt});

  auto stack = [dim](const std::vector<std::vector<float>>& xs, std::span<const std::size_t> rows) {
    std::vector<float> v;
    v.reserve(rows.size() * dim);
    for (std::size_t r : rows) v.insert(v.end(), xs[r].begin(), xs[r].end());
    return Tensor({rows.size(), dim}, std::move(v));
  };

  std::vector<std::size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> labels;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> rows(order.data() + start, end - start);
      labels.clear();
      for (std::size_t r : rows) labels.push_back(train_y[r]);
      Tensor logits = output(relu(hidden(stack(train_x, rows))));
      softmax_cross_entropy(logits, std::span<const int>(labels)).backward();
      opt.step();
    }
  }

  NoGradGuard no_grad;
  std::vector<std::size_t> all(test_x.size());
  std::iota(all.begin(), all.end(), 0);
  Tensor logits = output(relu(hidden(stack(test_x, all))));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_x.size(); ++i) {
    auto row = logits.data().subspan(i * num_classes, num_classes);
    const auto pred = std::max_element(row.begin(), row.end()) - row.begin();
    if (pred == test_y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_x.size());
}

ClassificationReport run_classification(const std::vector<ClipFeature>& train,
                                        const std::vector<ClipFeature>& test, const MlpConfig& config) {
  if (config.repeats < 1) throw std::invalid_argument("repeats must be at least 1");
  if (train.empty() || test.empty()) throw std::invalid_argument("train and test splits must be non-empty");
  std::set<int> train_classes;
  int max_label = 0;
  for (const auto& f : train) {
    if (f.label < 0) throw std::invalid_argument("negative class label for " + f.clip_id);
    train_classes.insert(f.label);
    max_label = std::max(max_label, f.label);
  }
  for (const auto& f : test) {
    if (!train_classes.contains(f.label)) {
      throw std::invalid_argument("class " + std::to_string(f.label) + " (clip " + f.clip_id +
                                  ") is absent from the training split");
    }
  }
  if (train_classes.size() < 2) throw std::invalid_argument("classification needs at least two classes");
  const auto num_classes = static_cast<std::size_t>(max_label) + 1;

  std::vector<std::vector<float>> raw;
  for (const auto& f : train) raw.push_back(f.values);
  const Standardizer standardizer = Standardizer::fit(raw);
  std::vector<std::vector<float>> train_x, test_x;
  std::vector<int> train_y, test_y;
  for (const auto& f : train) {
    train_x.push_back(standardizer.apply(f.values));
    train_y.push_back(f.label);
  }
  for (const auto& f : test) {
    test_x.push_back(standardizer.apply(f.values));
    test_y.push_back(f.label);
  }

  ClassificationReport report;
  Rng seeds(config.seed);
  for (std::size_t r = 0; r < config.repeats; ++r) {
    const std::uint64_t s = seeds.fork(r).next();
    report.accuracies.push_back(train_and_score_mlp(train_x, train_y, test_x, test_y, num_classes, config, s));
  }
  const double n = static_cast<double>(report.accuracies.size());
  report.mean_accuracy = std::accumulate(report.accuracies.begin(), report.accuracies.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : report.accuracies) ss += (a - report.mean_accuracy) * (a - report.mean_accuracy);
  report.std_accuracy = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  return report;
}

}  // namespace coala
