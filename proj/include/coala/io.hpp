// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "coala/audio.hpp"

namespace coala {

/// One `clip_path<TAB>tag1,tag2,...` line. The path as written is the clip
/// id; `path` is resolved against the manifest's directory.
struct ManifestEntry {
  std::string clip_id;
  std::filesystem::path path;
  std::vector<std::string> tags;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);
void write_manifest(const std::filesystem::path& manifest, const std::vector<ManifestEntry>& entries);

/// "COALAPAT", u32 count, then per record: u32 id length, UTF-8 id,
/// u32 frame offset, 96*96 f32. Little-endian throughout.
void write_patch_store(std::ostream& out, const std::vector<SpectrogramPatch>& patches);
std::vector<SpectrogramPatch> read_patch_store(std::istream& in);
void save_patch_store(const std::filesystem::path& path, const std::vector<SpectrogramPatch>& patches);
std::vector<SpectrogramPatch> load_patch_store(const std::filesystem::path& path);

/// `clip_id<TAB>label<TAB>split` lines.
struct LabelEntry {
  std::string clip_id;
  int label = 0;
  std::string split;
};
std::vector<LabelEntry> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<LabelEntry>& labels);

/// A clip-level feature vector; CSV row `clip_id,label,split,v0,...`.
struct ClipFeature {
  std::string clip_id;
  int label = 0;
  std::string split;
  std::vector<float> values;
};
void write_features_csv(const std::filesystem::path& path, const std::vector<ClipFeature>& features);
std::vector<ClipFeature> read_features_csv(const std::filesystem::path& path);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Raises std::runtime_error naming the path when it does not exist.
void require_file(const std::filesystem::path& path);

}  // namespace coala
