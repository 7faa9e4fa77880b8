// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <toml.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "coala/audio.hpp"
#include "coala/cca.hpp"
#include "coala/evaluation.hpp"
#include "coala/io.hpp"
#include "coala/parallel.hpp"
#include "coala/tags.hpp"
#include "coala/training.hpp"

#ifndef COALA_GIT_DESCRIBE
#define COALA_GIT_DESCRIBE "unknown"
#endif

namespace coala::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json toml_file_to_json(const fs::path& path) {
  require_file(path);
  toml::table table;
  try {
    table = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << path.string() << ": " << e.description() << " at line " << e.source().begin.line;
    throw FormatError(msg.str());
  }
  std::ostringstream text;
  text << toml::json_formatter{table};
  return json::parse(text.str());
}

// Flag, then config file, then COALA_SEED, then 0.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const json& config) {
  if (flag) return *flag;
  if (config.contains("seed")) return config.at("seed").get<std::uint64_t>();
  if (const char* env = std::getenv("COALA_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      return v;
    } catch (const std::exception&) {
      throw UsageError(std::string("COALA_SEED must be a nonnegative integer, got '") + env + "'");
    }
  }
  return 0;
}

// Reproducibility record written into run directories before work starts
// and completed with output digests at the end.
class RunManifest {
 public:
  RunManifest(std::string command, const std::vector<std::string>& args, fs::path dir)
      : dir_(std::move(dir)) {
    doc_["command"] = std::move(command);
    doc_["argv"] = args;
    doc_["git_describe"] = COALA_GIT_DESCRIBE;
    doc_["started_at"] = utc_now();
    doc_["inputs"] = json::object();
  }
  void input(const fs::path& path) { doc_["inputs"][path.string()] = sha256_file(path); }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }
  void write() const {
    fs::create_directories(dir_);
    std::ofstream(dir_ / "run_manifest.json") << doc_.dump(2) << '\n';
  }
  void finish(const std::vector<fs::path>& outputs) {
    doc_["finished_at"] = utc_now();
    json digests = json::object();
    for (const auto& p : outputs) {
      if (fs::exists(p)) digests[fs::relative(p, dir_).string()] = sha256_file(p);
    }
    doc_["outputs"] = digests;
    write();
  }

 private:
  fs::path dir_;
  json doc_;
};

std::map<std::string, const ManifestEntry*> index_manifest(const std::vector<ManifestEntry>& manifest) {
  std::map<std::string, const ManifestEntry*> out;
  for (const auto& e : manifest) out[e.clip_id] = &e;
  return out;
}

AudioClip load_conformed(const ManifestEntry& entry) {
  require_file(entry.path);
  return conform(load_wav(entry.path));
}

// ---- vocab ------------------------------------------------------------------

struct VocabArgs {
  std::string in, out;
  std::size_t max_tags = 1000;
  double max_fraction = 0.70;
};

int run_vocab(const VocabArgs& a, std::ostream& out) {
  const auto manifest = read_manifest(a.in);
  std::vector<std::vector<std::string>> tags;
  for (const auto& e : manifest) tags.push_back(e.tags);
  VocabularyOptions opts;
  opts.max_tags = a.max_tags;
  opts.max_document_fraction = a.max_fraction;
  const Vocabulary vocab = build_vocabulary(tags, opts);
  save_vocabulary(a.out, vocab);
  out << "vocabulary: " << vocab.size() << " tags from " << manifest.size() << " clips -> " << a.out << '\n';
  return kExitOk;
}

// ---- preprocess -------------------------------------------------------------

struct PreprocessArgs {
  std::string in, out;
  std::size_t threads = default_threads();
};

int run_preprocess(const PreprocessArgs& a, std::ostream& out) {
  const auto manifest = read_manifest(a.in);
  std::vector<SpectrogramPatch> patches(manifest.size());
  parallel_for(manifest.size(), a.threads, [&](std::size_t i) {
    patches[i] = extract_patch(logmel(load_conformed(manifest[i])), manifest[i].clip_id);
  });
  save_patch_store(a.out, patches);
  out << "patches: " << patches.size() << " -> " << a.out << '\n';
  return kExitOk;
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string spec, out;
  std::optional<std::uint64_t> seed;
};

int run_synth(const SynthArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  SyntheticCorpusSpec spec;
  json file = json::object();
  RunManifest run("synth", argv, a.out);
  if (!a.spec.empty()) {
    file = toml_file_to_json(a.spec);
    run.input(a.spec);
  }
  try {
    spec.merge_json(file);
    spec.seed = resolve_seed(a.seed, file);
    spec.validate();
  } catch (const json::exception& e) {
    throw UsageError(std::string("synth spec: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("synth spec: ") + e.what());
  }
  run.set("config", spec.to_json());
  run.set("seed", spec.seed);
  run.write();

  const SyntheticCorpus corpus = synthesize_corpus(spec);
  write_corpus(a.out, corpus, spec);
  std::vector<fs::path> outputs{fs::path(a.out) / "manifest.tsv", fs::path(a.out) / "labels.tsv",
                                fs::path(a.out) / "spec.json"};
  run.finish(outputs);
  out << "corpus: " << corpus.clips.size() << " clips, " << spec.num_concepts << " concepts -> " << a.out << '\n';
  return kExitOk;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string mode, data, vocab, manifest, config, out;
  std::optional<std::size_t> epochs, batch_size, checkpoint_every;
  std::optional<double> lr, momentum, clip_norm, val_fraction;
  std::optional<std::uint64_t> seed;
};

TrainConfig resolve_train_config(const TrainArgs& a, const json& file, std::size_t num_tags) {
  TrainConfig c;
  try {
    c.merge_json(file);
    if (!a.mode.empty()) c.mode = parse_mode(a.mode);
    if (a.epochs) c.epochs = *a.epochs;
    if (a.batch_size) c.batch_size = *a.batch_size;
    if (a.checkpoint_every) c.checkpoint_every = *a.checkpoint_every;
    if (a.lr) c.learning_rate = *a.lr;
    if (a.momentum) c.momentum = *a.momentum;
    if (a.clip_norm) c.clip_norm = *a.clip_norm > 0.0 ? std::optional<double>(*a.clip_norm) : std::nullopt;
    if (a.val_fraction) c.val_fraction = *a.val_fraction;
    c.seed = resolve_seed(a.seed, file);
    // The vocabulary fixes the tag dimension.
    c.topology.num_tags = num_tags;
    c.validate();
  } catch (const json::exception& e) {
    throw UsageError(std::string("train config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("train config: ") + e.what());
  }
  return c;
}

int run_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  for (const auto& p : {a.data, a.vocab, a.manifest}) require_file(p);
  json file = json::object();
  if (!a.config.empty()) file = toml_file_to_json(a.config);
  const Vocabulary vocab = load_vocabulary(a.vocab);
  const TrainConfig config = resolve_train_config(a, file, vocab.size());

  RunManifest run("train", argv, a.out);
  for (const auto& p : {a.data, a.vocab, a.manifest}) run.input(p);
  if (!a.config.empty()) run.input(a.config);
  run.set("config", config.to_json());
  run.set("seed", config.seed);
  run.write();

  std::size_t discarded = 0;
  const Dataset all = build_dataset(load_patch_store(a.data), read_manifest(a.manifest), vocab, &discarded);
  auto [train_set, val_set] = split(all, config.val_fraction, config.seed);
  out << "train: " << train_set.size() << " pairs, validation " << val_set.size() << ", discarded clips "
      << discarded << ", mode " << to_string(config.mode) << ", " << config.effective_epochs() << " epochs\n";

  const fs::path dir(a.out);
  try {
    TrainResult result = train_to_directory(train_set, val_set, config, dir, [&](const EpochSummary& s) {
      char line[160];
      std::snprintf(line, sizeof line, "epoch %zu/%zu  train %.4g", s.epoch, config.effective_epochs(),
                    s.train.total);
      out << line;
      if (s.validation) {
        std::snprintf(line, sizeof line, "  val %.4g (L_xi %.4g)", s.validation->total, s.validation->contrastive);
        out << line;
      }
      out << '\n' << std::flush;
    });
    out << "best epoch " << result.best_epoch << " -> " << (dir / "best.ckpt").string() << '\n';
  } catch (const TrainingAborted&) {
    run.finish({dir / "last-good.ckpt", dir / "nonfinite.json", dir / "log.jsonl"});
    throw;
  }
  std::vector<fs::path> outputs{dir / "best.ckpt", dir / "last.ckpt", dir / "log.jsonl", dir / "config.json"};
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().filename().string().rfind("epoch_", 0) == 0) outputs.push_back(entry.path());
  }
  std::sort(outputs.begin(), outputs.end());
  run.finish(outputs);
  return kExitOk;
}

// ---- embed ------------------------------------------------------------------

struct ClipSource {
  std::string clips, manifest, labels;

  fs::path manifest_path() const { return manifest.empty() ? fs::path(clips) / "manifest.tsv" : fs::path(manifest); }
  fs::path labels_path() const { return labels.empty() ? fs::path(clips) / "labels.tsv" : fs::path(labels); }
};

struct EmbedArgs {
  ClipSource source;
  std::string checkpoint, out, split;
  bool mfcc = false;
  std::size_t threads = default_threads();
};

int run_embed(const EmbedArgs& a, std::ostream& out) {
  if (a.mfcc == !a.checkpoint.empty()) throw UsageError("embed needs exactly one of --checkpoint or --mfcc");
  const auto manifest = read_manifest(a.source.manifest_path());
  auto labels = read_labels(a.source.labels_path());
  if (!a.split.empty()) std::erase_if(labels, [&](const LabelEntry& l) { return l.split != a.split; });
  if (labels.empty()) throw std::invalid_argument("no labelled clips" + (a.split.empty() ? "" : " in split " + a.split));
  const auto by_id = index_manifest(manifest);
  std::vector<std::string> missing;
  for (const auto& l : labels) {
    if (!by_id.contains(l.clip_id)) missing.push_back(l.clip_id);
  }
  if (!missing.empty()) {
    std::string msg = "labelled clips absent from the manifest:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw FormatError(msg);
  }

  std::vector<ClipFeature> features(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) features[i] = {labels[i].clip_id, labels[i].label, labels[i].split, {}};
  if (a.mfcc) {
    parallel_for(labels.size(), a.threads, [&](std::size_t i) {
      features[i].values = mfcc_feature(load_conformed(*by_id.at(labels[i].clip_id)));
    });
  } else {
    require_file(a.checkpoint);
    CoalaModel model = CoalaModel::from_checkpoint(load_checkpoint(a.checkpoint));
    // Decode audio in parallel; the model runs on one thread.
    constexpr std::size_t kChunk = 64;
    for (std::size_t start = 0; start < labels.size(); start += kChunk) {
      const std::size_t n = std::min(kChunk, labels.size() - start);
      std::vector<AudioClip> clips(n);
      parallel_for(n, a.threads, [&](std::size_t i) { clips[i] = load_conformed(*by_id.at(labels[start + i].clip_id)); });
      for (std::size_t i = 0; i < n; ++i) features[start + i].values = embedding_feature(model, clips[i]);
    }
  }
  write_features_csv(a.out, features);
  out << "features: " << features.size() << " clips x " << features.front().values.size() << " -> " << a.out
      << '\n';
  return kExitOk;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> features;
  std::size_t repeats = 10;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int run_eval(const EvalArgs& a, std::ostream& out) {
  std::vector<ClipFeature> train_set, test_set;
  if (a.features.size() == 2) {
    train_set = read_features_csv(a.features[0]);
    test_set = read_features_csv(a.features[1]);
  } else {
    for (auto& f : read_features_csv(a.features[0])) (f.split == "test" ? test_set : train_set).push_back(std::move(f));
  }
  MlpConfig config;
  config.repeats = a.repeats;
  if (a.epochs) config.epochs = *a.epochs;
  config.seed = resolve_seed(a.seed, json::object());
  const ClassificationReport report = run_classification(train_set, test_set, config);
  char line[96];
  for (std::size_t r = 0; r < report.accuracies.size(); ++r) {
    std::snprintf(line, sizeof line, "repeat %2zu  accuracy %.4f\n", r, report.accuracies[r]);
    out << line;
  }
  std::snprintf(line, sizeof line, "mean accuracy %.4f +- %.4f over %zu repeats (%zu train, %zu test)\n",
                report.mean_accuracy, report.std_accuracy, report.accuracies.size(), train_set.size(),
                test_set.size());
  out << line;
  if (!a.out.empty()) {
    json doc = report.to_json();
    doc["features"] = a.features;
    doc["seed"] = config.seed;
    doc["mlp"] = {{"hidden", config.hidden},     {"epochs", config.epochs},
                  {"batch_size", config.batch_size}, {"learning_rate", config.learning_rate},
                  {"momentum", config.momentum}};
    std::ofstream(a.out) << doc.dump(2) << '\n';
  }
  return kExitOk;
}

// ---- cca --------------------------------------------------------------------

struct CcaArgs {
  std::vector<std::string> embeddings;
  ClipSource source;
  std::string out;
  std::optional<std::size_t> top_k;
  double energy = 0.99;
  std::optional<std::uint64_t> seed;
  std::size_t threads = default_threads();
};

int run_cca(const CcaArgs& a, std::ostream& out) {
  std::vector<EmbeddingSet> sets;
  std::set<std::string> ids;
  for (const auto& path : a.embeddings) {
    const auto rows = read_features_csv(path);
    if (rows.empty()) throw FormatError(path + ": no rows");
    EmbeddingSet s;
    s.model = fs::path(path).stem().string();
    s.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().values.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      s.clip_ids.push_back(rows[r].clip_id);
      ids.insert(rows[r].clip_id);
      for (std::size_t c = 0; c < rows[r].values.size(); ++c) s.values(r, c) = rows[r].values[c];
    }
    sets.push_back(std::move(s));
  }
  const auto manifest = read_manifest(a.source.manifest_path());
  const auto by_id = index_manifest(manifest);
  std::vector<std::string> wanted(ids.begin(), ids.end()), missing;
  for (const auto& id : wanted) {
    if (!by_id.contains(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string msg = "embedded clips absent from " + a.source.manifest_path().string() + ":";
    for (const auto& m : missing) msg += "\n  " + m;
    throw FormatError(msg);
  }
  std::vector<ClipStatistics> stats(wanted.size());
  parallel_for(wanted.size(), a.threads, [&](std::size_t i) {
    stats[i] = clip_statistics(wanted[i], descriptors(load_conformed(*by_id.at(wanted[i]))));
  });
  ReportOptions opts;
  opts.embedding_energy = a.energy;
  opts.top_k = a.top_k;
  opts.seed = resolve_seed(a.seed, json::object());
  opts.threads = a.threads;
  const CcaReport report = build_report(sets, stats, opts);
  report.write_text(out);
  std::ofstream csv(a.out);
  if (!csv) throw std::runtime_error("cannot write " + a.out);
  report.write_csv(csv);
  return kExitOk;
}

}  // namespace

nlohmann::json read_toml(const std::filesystem::path& path) { return toml_file_to_json(path); }

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"COALA: co-aligned audio and tag autoencoders", "coala"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical abort.\n"
             "Seeds: --seed, then the config file's seed, then COALA_SEED, then 0.");

  VocabArgs vocab;
  auto* v = app.add_subcommand("vocab", "Build the tag vocabulary from a manifest");
  v->add_option("--in", vocab.in, "Manifest TSV (clip_path<TAB>tag1,tag2,...)")->required();
  v->add_option("--out", vocab.out, "Vocabulary TSV")->required();
  v->add_option("--max-tags", vocab.max_tags, "Vocabulary size cap")->capture_default_str();
  v->add_option("--max-fraction", vocab.max_fraction, "Drop tags on more than this fraction of clips")
      ->capture_default_str();

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "Extract the max-energy log-mel patch of every clip");
  p->add_option("--in", pre.in, "Manifest TSV")->required();
  p->add_option("--out", pre.out, "Patch store")->required();
  p->add_option("--threads", pre.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate the synthetic labelled corpus");
  s->add_option("--spec", synth.spec, "Corpus spec (TOML)");
  s->add_option("--out", synth.out, "Corpus directory")->required();
  s->add_option("--seed", synth.seed, "Seed");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model (ae-c, e-c or the cnn baseline)");
  t->add_option("--mode", tr.mode, "ae-c | e-c | cnn")->check(CLI::IsMember({"ae-c", "e-c", "cnn"}));
  t->add_option("--data", tr.data, "Patch store")->required();
  t->add_option("--vocab", tr.vocab, "Vocabulary TSV")->required();
  t->add_option("--manifest", tr.manifest, "Manifest TSV holding each clip's tags")->required();
  t->add_option("--config", tr.config, "Training config (TOML)");
  t->add_option("--out", tr.out, "Run directory")->required();
  t->add_option("--epochs", tr.epochs, "Epochs");
  t->add_option("--batch-size", tr.batch_size, "Minibatch size");
  t->add_option("--lr", tr.lr, "Learning rate");
  t->add_option("--momentum", tr.momentum, "SGD momentum");
  t->add_option("--clip-norm", tr.clip_norm, "Global gradient-norm clip (0 disables)");
  t->add_option("--val-fraction", tr.val_fraction, "Validation fraction");
  t->add_option("--checkpoint-every", tr.checkpoint_every, "Also save every n epochs");
  t->add_option("--seed", tr.seed, "Seed");

  EmbedArgs emb;
  auto* e = app.add_subcommand("embed", "Write clip-level features (embeddings or MFCC statistics) as CSV");
  e->add_option("--checkpoint", emb.checkpoint, "Model checkpoint");
  e->add_flag("--mfcc", emb.mfcc, "MFCC statistics instead of embeddings");
  e->add_option("--clips", emb.source.clips, "Corpus directory holding manifest.tsv and labels.tsv");
  e->add_option("--manifest", emb.source.manifest, "Manifest TSV (overrides --clips)");
  e->add_option("--labels", emb.source.labels, "Labels TSV (overrides --clips)");
  e->add_option("--split", emb.split, "Only clips of this split");
  e->add_option("--out", emb.out, "Features CSV")->required();
  e->add_option("--threads", emb.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* va = app.add_subcommand("eval", "Downstream MLP classification on feature CSVs");
  va->add_option("--features", ev.features, "train.csv test.csv, or one CSV split by its split column")
      ->required()
      ->expected(1, 2);
  va->add_option("--repeats", ev.repeats, "Independent MLP runs")->capture_default_str()->check(CLI::PositiveNumber);
  va->add_option("--epochs", ev.epochs, "MLP epochs (default 200)");
  va->add_option("--seed", ev.seed, "Seed");
  va->add_option("--out", ev.out, "Report JSON");

  CcaArgs cc;
  auto* c = app.add_subcommand("cca", "Canonical correlation of embeddings with acoustic statistics");
  c->add_option("--embeddings", cc.embeddings, "Embedding CSVs, one per model")->required();
  c->add_option("--clips", cc.source.clips, "Corpus directory holding manifest.tsv");
  c->add_option("--manifest", cc.source.manifest, "Manifest TSV (overrides --clips)");
  c->add_option("--out", cc.out, "Report CSV")->required();
  c->add_option("--top-k", cc.top_k, "Average only the k largest correlations");
  c->add_option("--energy", cc.energy, "Spectral energy kept on the embedding side")->capture_default_str();
  c->add_option("--seed", cc.seed, "Seed for the noise comparator");
  c->add_option("--threads", cc.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*v) return run_vocab(vocab, out);
    if (*p) return run_preprocess(pre, out);
    if (*s) return run_synth(synth, args, out);
    if (*t) return run_train(tr, args, out);
    if (*e) {
      if (emb.source.clips.empty() && (emb.source.manifest.empty() || emb.source.labels.empty())) {
        throw UsageError("embed needs --clips or both --manifest and --labels");
      }
      return run_embed(emb, out);
    }
    if (*va) return run_eval(ev, out);
    if (*c) {
      if (cc.source.clips.empty() && cc.source.manifest.empty()) throw UsageError("cca needs --clips or --manifest");
      return run_cca(cc, out);
    }
  } catch (const UsageError& ue) {
    err << "error: " << ue.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const TrainingAborted& ta) {
    err << "numerical abort: " << ta.what() << "\n";
    return kExitNumerical;
  } catch (const NumericalError& ne) {
    err << "numerical abort: " << ne.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace coala::cli
