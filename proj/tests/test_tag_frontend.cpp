// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sstream>

#include "coala/tags.hpp"
#include "coala/tensor.hpp"

namespace coala {
namespace {

TEST(NormalizeTag, Examples) {
  EXPECT_EQ(normalize_tag("Dogs"), "dog");
  EXPECT_EQ(normalize_tag("the"), std::nullopt);
  EXPECT_EQ(normalize_tag("glasses"), "glass");
  EXPECT_EQ(normalize_tag("  "), std::nullopt);
  EXPECT_EQ(normalize_tag("THE"), std::nullopt);
}

TEST(NormalizeTag, PluralRules) {
  const std::vector<std::pair<std::string, std::string>> cases{
      {"birds", "bird"},       {"cities", "city"},       {"movies", "movie"},
      {"leaves", "leaf"},      {"knives", "knife"},      {"waves", "wave"},
      {"boxes", "box"},        {"churches", "church"},   {"bushes", "bush"},
      {"buzzes", "buzz"},      {"headaches", "headache"}, {"houses", "house"},
      {"noises", "noise"},     {"buses", "bus"},         {"echoes", "echo"},
      {"shoes", "shoe"},       {"children", "child"},    {"women", "woman"},
      {"sheep", "sheep"},      {"news", "news"},         {"bass", "bass"},
      {"chorus", "chorus"},    {"analysis", "analysis"}, {"drums", "drum"},
      {"voices", "voice"},     {"ties", "tie"},          {"field-recordings", "field-recording"},
      {"gas", "gas"},          {"prizes", "prize"},      {"quizzes", "quiz"},
  };
  for (const auto& [in, out] : cases) EXPECT_EQ(normalize_tag(in), out) << in;
}

TEST(NormalizeTag, Idempotent) {
  const std::vector<std::string> words{
      "Dogs",    "glasses", "cities",  "Leaves",  "boxes",   "echoes", "classes", "dresses",
      "news",    "species", "Thieves", "ambience", "noises", "birdies", "series", "us",
      "bosses",  "kisses",  "process", "status",  "women",   "ours",   "theirs", "yours",
      "crisis",  "axes",    "ss",      "sss",     "piano",   "pianos", "loops",  "loop"};
  for (const auto& w : words) {
    auto once = normalize_tag(w);
    if (!once) continue;
    EXPECT_EQ(normalize_tag(*once), once) << w;
  }
}

TEST(NormalizeTag, StopWordsAfterSingularisation) {
  EXPECT_TRUE(is_stop_word("ours"));
  EXPECT_EQ(normalize_tag("Ours"), std::nullopt);
  EXPECT_EQ(normalize_tag("dons"), std::nullopt);  // singular "don" is a stop word
}

TEST(BuildVocabulary, RemovesTagsOnMoreThanSeventyPercent) {
  std::vector<std::vector<std::string>> clips(100);
  for (std::size_t i = 0; i < 100; ++i) {
    if (i < 71) clips[i].push_back("common");
    if (i < 70) clips[i].push_back("frequent");
    clips[i].push_back("id" + std::to_string(i % 10));
  }
  Vocabulary v = build_vocabulary(clips);
  EXPECT_FALSE(v.index.contains("common"));
  ASSERT_TRUE(v.index.contains("frequent"));
  EXPECT_EQ(v.index.at("frequent"), 0u);
  EXPECT_EQ(v.doc_frequency[0], 70u);
}

TEST(BuildVocabulary, SmallCorpusAndTies) {
  std::vector<std::vector<std::string>> clips{
      {"b", "cat", "dog"}, {"dog", "Dogs", "ant"}, {"cat", "bee"}, {"owl"}, {"zebra"}, {"yak"}};
  // "b" is 1 letter and not a stop word; counts are after normalisation.
  Vocabulary v = build_vocabulary(clips);
  ASSERT_EQ(v.size(), 8u);
  EXPECT_EQ(v.tags[0], "cat");
  EXPECT_EQ(v.tags[1], "dog");
  EXPECT_EQ(v.doc_frequency[1], 2u);  // duplicates on one clip count once
  EXPECT_EQ(v.tags[2], "ant");
  EXPECT_EQ(v.tags[3], "b");
  EXPECT_EQ(v.tags[4], "bee");
}

TEST(BuildVocabulary, CapAndDeterminism) {
  std::vector<std::vector<std::string>> clips;
  for (int i = 0; i < 50; ++i) clips.push_back({"t" + std::to_string(i % 7), "u" + std::to_string(i % 3)});
  VocabularyOptions opts;
  opts.max_tags = 5;
  Vocabulary a = build_vocabulary(clips, opts), b = build_vocabulary(clips, opts);
  EXPECT_EQ(a.size(), 5u);
  EXPECT_EQ(a.tags, b.tags);
  for (std::size_t i = 1; i < a.size(); ++i) {
    EXPECT_TRUE(a.doc_frequency[i - 1] > a.doc_frequency[i] ||
                (a.doc_frequency[i - 1] == a.doc_frequency[i] && a.tags[i - 1] < a.tags[i]));
  }
}

TEST(BuildVocabulary, EmptyAfterFilteringIsAnError) {
  std::vector<std::vector<std::string>> clips{{"same"}, {"same"}, {"the"}};
  EXPECT_THROW(build_vocabulary(clips), std::invalid_argument);
}

TEST(Encode, Examples) {
  Vocabulary v = build_vocabulary({{"dog", "bark"}, {"cat"}, {"dog"}, {"bird"}});
  auto bits = encode({"dog", "bark"}, v);
  ASSERT_TRUE(bits);
  EXPECT_EQ(bits->size(), 2u);
  EXPECT_EQ(encode({"truck", "the"}, v), std::nullopt);
  auto dup = encode({"dog", "Dogs", "dog"}, v);
  ASSERT_TRUE(dup);
  EXPECT_EQ(dup->size(), 1u);
  auto hot = multi_hot(*bits, v.size());
  EXPECT_EQ(std::count(hot.begin(), hot.end(), 1.0f), 2);
}

TEST(VocabularyFile, RoundTrip) {
  Vocabulary v = build_vocabulary({{"dog", "bark"}, {"cat"}, {"dog"}, {"bird"}});
  std::stringstream s;
  write_vocabulary(s, v);
  EXPECT_EQ(s.str().substr(0, 6), "dog\t2\n");
  Vocabulary back = read_vocabulary(s);
  EXPECT_EQ(back.tags, v.tags);
  EXPECT_EQ(back.doc_frequency, v.doc_frequency);
  std::stringstream bad("dog 2\n");
  EXPECT_THROW(read_vocabulary(bad), FormatError);
  std::stringstream dup("a\t1\na\t2\n");
  EXPECT_THROW(read_vocabulary(dup), FormatError);
}

}  // namespace
}  // namespace coala
