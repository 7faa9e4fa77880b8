// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include "coala/tags.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "tag_tables.hpp"
#include "coala/tensor.hpp"

namespace coala {

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <const auto& Items>
const std::unordered_set<std::string_view>& as_set() {
  static const std::unordered_set<std::string_view> set(Items.begin(), Items.end());
  return set;
}

const std::unordered_map<std::string_view, std::string_view>& irregulars() {
  static const std::unordered_map<std::string_view, std::string_view> map = [] {
    std::unordered_map<std::string_view, std::string_view> m;
    for (const auto& [plural, singular] : tag_tables::kIrregularPlurals) m.emplace(plural, singular);
    return m;
  }();
  return map;
}

const std::unordered_map<std::string_view, std::string_view>& ves_exceptions() {
  static const std::unordered_map<std::string_view, std::string_view> map = [] {
    std::unordered_map<std::string_view, std::string_view> m;
    for (const auto& [plural, singular] : tag_tables::kVesToF) m.emplace(plural, singular);
    return m;
  }();
  return map;
}

// One rule application; returns the word unchanged when no rule fires.
std::string singularize_once(const std::string& w) {
  if (w.size() <= 3) return w;
  if (as_set<tag_tables::kInvariantNouns>().contains(w)) return w;
  if (auto it = irregulars().find(w); it != irregulars().end()) return std::string(it->second);
  if (ends_with(w, "ss") || ends_with(w, "us") || ends_with(w, "is") || ends_with(w, "'s")) return w;
  if (!ends_with(w, "s")) return w;

  const std::string stem_s = w.substr(0, w.size() - 1);
  const std::string stem_es = w.substr(0, w.size() - 2);
  if (ends_with(w, "ies")) {
    if (w.size() > 4 && !as_set<tag_tables::kIeNouns>().contains(stem_s)) {
      return w.substr(0, w.size() - 3) + "y";
    }
    return stem_s;
  }
  if (ends_with(w, "ves")) {
    if (auto it = ves_exceptions().find(w); it != ves_exceptions().end()) return std::string(it->second);
    return stem_s;
  }
  if (ends_with(w, "sses") || ends_with(w, "xes") || ends_with(w, "zzes") || ends_with(w, "shes")) {
    return stem_es;
  }
  if (ends_with(w, "ches")) {
    return as_set<tag_tables::kCheNouns>().contains(stem_s) ? stem_s : stem_es;
  }
  if (ends_with(w, "ses") || ends_with(w, "zes") || ends_with(w, "oes")) {
    return as_set<tag_tables::kEsPlurals>().contains(w) ? stem_es : stem_s;
  }
  return stem_s;
}

}  // namespace

bool is_stop_word(std::string_view word) { return as_set<tag_tables::kStopWords>().contains(word); }

std::string singularize(std::string_view word) {
  std::string current(word);
  for (;;) {
    std::string next = singularize_once(current);
    if (next == current) return current;
    current = std::move(next);
  }
}

std::optional<std::string> normalize_tag(std::string_view raw) {
  std::string word(trim(raw));
  std::transform(word.begin(), word.end(), word.begin(), [](unsigned char c) {
    return c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
  });
  if (word.empty() || is_stop_word(word)) return std::nullopt;
  word = singularize(word);
  if (word.empty() || is_stop_word(word)) return std::nullopt;
  return word;
}

void Vocabulary::rebuild_index() {
  index.clear();
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (!index.emplace(tags[i], i).second) throw FormatError("duplicate vocabulary tag '" + tags[i] + "'");
  }
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& clip_tags,
                            const VocabularyOptions& options) {
  if (clip_tags.empty()) throw std::invalid_argument("cannot build a vocabulary from zero clips");
  std::map<std::string, std::size_t> counts;
  for (const auto& tags : clip_tags) {
    std::set<std::string> seen;
    for (const auto& raw : tags) {
      if (auto t = normalize_tag(raw)) seen.insert(std::move(*t));
    }
    for (const auto& t : seen) ++counts[t];
  }
  const double clips = static_cast<double>(clip_tags.size());
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tag, count] : counts) {
    if (static_cast<double>(count) / clips > options.max_document_fraction) continue;
    kept.emplace_back(tag, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (kept.size() > options.max_tags) kept.resize(options.max_tags);
  if (kept.empty()) {
    throw std::invalid_argument("vocabulary is empty after removing tags on more than " +
                                std::to_string(options.max_document_fraction * 100) + "% of clips");
  }
  Vocabulary vocab;
  for (auto& [tag, count] : kept) {
    vocab.tags.push_back(tag);
    vocab.doc_frequency.push_back(count);
  }
  vocab.rebuild_index();
  return vocab;
}

std::optional<std::vector<std::size_t>> encode(const std::vector<std::string>& clip_tags,
                                               const Vocabulary& vocab) {
  std::set<std::size_t> bits;
  for (const auto& raw : clip_tags) {
    auto t = normalize_tag(raw);
    if (!t) continue;
    if (auto it = vocab.index.find(*t); it != vocab.index.end()) bits.insert(it->second);
  }
  if (bits.empty()) return std::nullopt;
  return std::vector<std::size_t>(bits.begin(), bits.end());
}

std::vector<float> multi_hot(const std::vector<std::size_t>& indices, std::size_t size) {
  std::vector<float> v(size, 0.0f);
  for (std::size_t i : indices) v.at(i) = 1.0f;
  return v;
}

void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out << vocab.tags[i] << '\t' << vocab.doc_frequency[i] << '\n';
  }
}

Vocabulary read_vocabulary(std::istream& in) {
  Vocabulary vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw FormatError("vocabulary line " + std::to_string(line_no) + ": expected tag<TAB>count");
    }
    std::size_t count = 0;
    try {
      std::size_t used = 0;
      count = std::stoull(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw FormatError("vocabulary line " + std::to_string(line_no) + ": bad count");
    }
    vocab.tags.push_back(line.substr(0, tab));
    vocab.doc_frequency.push_back(count);
  }
  if (vocab.tags.empty()) throw FormatError("vocabulary is empty");
  vocab.rebuild_index();
  return vocab;
}

void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_vocabulary(out, vocab);
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_vocabulary(in);
}

}  // namespace coala
