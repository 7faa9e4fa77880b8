// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace coala {

/// Lower-cases, drops stop words and maps plural nouns to the singular.
/// Returns nullopt when nothing usable remains.
std::optional<std::string> normalize_tag(std::string_view raw);

bool is_stop_word(std::string_view word);
/// Rule-based singular form, applied until it stops changing.
std::string singularize(std::string_view word);

struct Vocabulary {
  std::vector<std::string> tags;
  std::vector<std::size_t> doc_frequency;
  std::unordered_map<std::string, std::size_t> index;

  std::size_t size() const { return tags.size(); }
  void rebuild_index();
};

struct VocabularyOptions {
  std::size_t max_tags = 1000;
  double max_document_fraction = 0.70;  // strictly greater is removed
};

/// Counts each normalised tag once per clip, removes tags on more than the
/// allowed fraction of clips and keeps the most frequent (ties broken
/// lexicographically).
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& clip_tags,
                            const VocabularyOptions& options = {});

/// Sorted, distinct vocabulary indices of a clip's tags, or nullopt if none
/// survive.
std::optional<std::vector<std::size_t>> encode(const std::vector<std::string>& clip_tags,
                                               const Vocabulary& vocab);
std::vector<float> multi_hot(const std::vector<std::size_t>& indices, std::size_t size);

/// One `tag<TAB>count` line per entry, in index order.
void write_vocabulary(std::ostream& out, const Vocabulary& vocab);
Vocabulary read_vocabulary(std::istream& in);
void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary load_vocabulary(const std::filesystem::path& path);

}  // namespace coala
