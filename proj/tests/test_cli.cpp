// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <unistd.h>

#include "cli.hpp"
#include "coala/io.hpp"

namespace coala::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result coala(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

void write_text(const fs::path& path, const std::string& text) { std::ofstream(path) << text; }

// One small corpus, vocabulary and patch store shared by every test.
class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("coala-cli-" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write_text(dir_ / "corpus.toml", "num_clips = 24\nseconds = 2.5\nseed = 4\n");
    write_text(dir_ / "train.toml", "batch_size = 8\nlearning_rate = 1e-5\nmomentum = 0.9\nepochs = 1\nseed = 21\n");
    ASSERT_EQ(coala({"synth", "--spec", path("corpus.toml"), "--out", path("corpus")}).code, kExitOk);
    ASSERT_EQ(coala({"vocab", "--in", path("corpus/manifest.tsv"), "--out", path("vocab.tsv")}).code, kExitOk);
    ASSERT_EQ(coala({"preprocess", "--in", path("corpus/manifest.tsv"), "--out", path("patches.bin"), "--threads", "2"})
                  .code,
              kExitOk);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }

  static std::vector<std::string> train_args(const std::string& out) {
    return {"train", "--data", path("patches.bin"), "--vocab", path("vocab.tsv"), "--manifest",
            path("corpus/manifest.tsv"), "--config", path("train.toml"), "--out", path(out)};
  }

  static inline fs::path dir_;
};

TEST_F(Pipeline, EndToEnd) {
  Result train = coala(train_args("run"));
  ASSERT_EQ(train.code, kExitOk) << train.err;
  EXPECT_NE(train.out.find("discarded clips 0"), std::string::npos) << train.out;
  for (const char* f : {"best.ckpt", "last.ckpt", "log.jsonl", "config.json", "run_manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  }
  const auto manifest = nlohmann::json::parse(std::ifstream(dir_ / "run" / "run_manifest.json"));
  EXPECT_EQ(manifest["command"], "train");
  EXPECT_EQ(manifest["seed"], 21);  // from the config file
  EXPECT_EQ(manifest["inputs"].size(), 4u);
  EXPECT_TRUE(manifest.contains("finished_at"));
  EXPECT_EQ(manifest["outputs"]["best.ckpt"], sha256_file(dir_ / "run" / "best.ckpt"));

  ASSERT_EQ(coala({"embed", "--checkpoint", path("run/best.ckpt"), "--clips", path("corpus"), "--out",
                   path("ae.csv")})
                .code,
            kExitOk);
  ASSERT_EQ(coala({"embed", "--mfcc", "--clips", path("corpus"), "--out", path("mfcc.csv")}).code, kExitOk);
  const auto features = read_features_csv(dir_ / "ae.csv");
  ASSERT_EQ(features.size(), 24u);
  EXPECT_EQ(features.front().values.size(), 1152u);
  EXPECT_EQ(read_features_csv(dir_ / "mfcc.csv").front().values.size(), 120u);

  Result eval = coala({"eval", "--features", path("mfcc.csv"), "--repeats", "2", "--epochs", "5", "--out",
                    path("eval.json")});
  ASSERT_EQ(eval.code, kExitOk) << eval.err;
  EXPECT_NE(eval.out.find("mean accuracy"), std::string::npos);
  EXPECT_EQ(nlohmann::json::parse(std::ifstream(dir_ / "eval.json"))["accuracies"].size(), 2u);

  Result cca = coala({"cca", "--embeddings", path("ae.csv"), path("mfcc.csv"), "--clips", path("corpus"), "--energy",
                   "0.9", "--out", path("cca.csv")});
  ASSERT_EQ(cca.code, kExitOk) << cca.err;
  std::ifstream csv(dir_ / "cca.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "model,descriptor,statistic,similarity,components");
  std::size_t rows = 0;
  for (std::string line; std::getline(csv, line);) rows += !line.empty();
  EXPECT_EQ(rows, 2u * (12u + 2u));
}

TEST_F(Pipeline, SeedFlagOverridesConfig) {
  std::vector<std::string> args = train_args("seeded");
  args.insert(args.end(), {"--seed", "99", "--epochs", "1"});
  ASSERT_EQ(coala(args).code, kExitOk);
  const auto manifest = nlohmann::json::parse(std::ifstream(dir_ / "seeded" / "run_manifest.json"));
  EXPECT_EQ(manifest["seed"], 99);
  EXPECT_EQ(manifest["config"]["seed"], 99);
}

TEST_F(Pipeline, InvalidConfigIsAUsageError) {
  write_text(dir_ / "bad.toml", "batch_size = 1\n");
  std::vector<std::string> args = train_args("bad");
  args[8] = path("bad.toml");
  Result r = coala(args);
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("batch"), std::string::npos) << r.err;
}

TEST_F(Pipeline, EmbedReportsClipsMissingFromTheManifest) {
  write_text(dir_ / "labels-extra.tsv", "clips/nowhere.wav\t0\ttest\n");
  Result r = coala({"embed", "--mfcc", "--manifest", path("corpus/manifest.tsv"), "--labels", path("labels-extra.tsv"),
                 "--out", path("x.csv")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("clips/nowhere.wav"), std::string::npos) << r.err;
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(coala({"--help"}).code, kExitOk);
  EXPECT_EQ(coala({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(coala({"vocab", "--in", "x.tsv"}).code, kExitUsage);  // --out missing
  Result missing = coala({"vocab", "--in", "/nonexistent/manifest.tsv", "--out", "/tmp/v.tsv"});
  EXPECT_EQ(missing.code, kExitData);
  EXPECT_NE(missing.err.find("/nonexistent/manifest.tsv"), std::string::npos);
  EXPECT_EQ(coala({"embed", "--out", "x.csv", "--clips", "."}).code, kExitUsage);  // neither model nor --mfcc
}

TEST(Cli, SeedFallsBackToEnvironment) {
  const fs::path dir = fs::temp_directory_path() / "coala-cli-env";
  fs::remove_all(dir);
  ::setenv("COALA_SEED", "17", 1);
  const Result r = coala({"synth", "--out", dir.string(), "--spec", "/nonexistent.toml"});
  EXPECT_EQ(r.code, kExitData);
  write_text(fs::temp_directory_path() / "coala-cli-env.toml", "num_clips = 4\nseconds = 1.0\n");
  ASSERT_EQ(coala({"synth", "--spec", (fs::temp_directory_path() / "coala-cli-env.toml").string(), "--out",
                   dir.string()})
                .code,
            kExitOk);
  const auto manifest = nlohmann::json::parse(std::ifstream(dir / "run_manifest.json"));
  EXPECT_EQ(manifest["seed"], 17);
  ::setenv("COALA_SEED", "not-a-number", 1);
  EXPECT_EQ(coala({"synth", "--out", dir.string()}).code, kExitUsage);
  ::unsetenv("COALA_SEED");
  fs::remove_all(dir);
  fs::remove(fs::temp_directory_path() / "coala-cli-env.toml");
}

}  // namespace
}  // namespace coala::cli
