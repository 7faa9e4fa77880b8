// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include "coala/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "coala/checkpoint.hpp"

namespace coala {

namespace {

constexpr char kPatchMagic[8] = {'C', 'O', 'A', 'L', 'A', 'P', 'A', 'T'};
constexpr std::uint32_t kMaxIdLength = 1 << 16;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

int parse_int(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError(where + ": '" + text + "' is not an integer");
}

}  // namespace

void require_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("no such file: " + path.string());
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  require_file(manifest);
  std::ifstream in(manifest);
  const std::filesystem::path base = manifest.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    ManifestEntry e;
    e.clip_id = line.substr(0, tab);
    if (e.clip_id.empty()) {
      throw FormatError(manifest.string() + ":" + std::to_string(line_no) + ": empty clip path");
    }
    std::filesystem::path p(e.clip_id);
    e.path = p.is_absolute() ? p : base / p;
    if (tab != std::string::npos) {
      for (auto& t : split(line.substr(tab + 1), ',')) {
        if (!t.empty()) e.tags.push_back(t);
      }
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::filesystem::path& manifest, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(manifest);
  if (!out) throw std::runtime_error("cannot write " + manifest.string());
  for (const auto& e : entries) {
    out << e.clip_id << '\t';
    for (std::size_t i = 0; i < e.tags.size(); ++i) out << (i ? "," : "") << e.tags[i];
    out << '\n';
  }
}

void write_patch_store(std::ostream& out, const std::vector<SpectrogramPatch>& patches) {
  out.write(kPatchMagic, sizeof kPatchMagic);
  le::put_u32(out, static_cast<std::uint32_t>(patches.size()));
  for (const auto& p : patches) {
    if (p.values.size() != kPatchFrames * kMelBands) {
      throw std::invalid_argument("patch '" + p.clip_id + "' has " + std::to_string(p.values.size()) +
                                  " values, expected " + std::to_string(kPatchFrames * kMelBands));
    }
    le::put_u32(out, static_cast<std::uint32_t>(p.clip_id.size()));
    out.write(p.clip_id.data(), static_cast<std::streamsize>(p.clip_id.size()));
    le::put_u32(out, p.frame_offset);
    for (float v : p.values) le::put_f32(out, v);
  }
}

std::vector<SpectrogramPatch> read_patch_store(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kPatchMagic, 8) != 0) {
    throw FormatError("not a patch store (bad magic)");
  }
  const std::uint32_t count = le::get_u32(in);
  std::vector<SpectrogramPatch> patches;
  patches.reserve(std::min<std::uint32_t>(count, 1 << 20));
  for (std::uint32_t r = 0; r < count; ++r) {
    SpectrogramPatch p;
    const std::uint32_t len = le::get_u32(in);
    if (len > kMaxIdLength) throw FormatError("patch record " + std::to_string(r) + ": id too long");
    p.clip_id.resize(len);
    if (!in.read(p.clip_id.data(), len)) throw FormatError("patch store truncated");
    p.frame_offset = le::get_u32(in);
    p.values.resize(kPatchFrames * kMelBands);
    for (float& v : p.values) v = le::get_f32(in);
    patches.push_back(std::move(p));
  }
  return patches;
}

void save_patch_store(const std::filesystem::path& path, const std::vector<SpectrogramPatch>& patches) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_patch_store(out, patches);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<SpectrogramPatch> load_patch_store(const std::filesystem::path& path) {
  require_file(path);
  std::ifstream in(path, std::ios::binary);
  try {
    return read_patch_store(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<LabelEntry> read_labels(const std::filesystem::path& path) {
  require_file(path);
  std::ifstream in(path);
  std::vector<LabelEntry> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    auto parts = split(line, '\t');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (parts.size() != 3) throw FormatError(where + ": expected clip_id<TAB>label<TAB>split");
    labels.push_back({parts[0], parse_int(parts[1], where), parts[2]});
  }
  return labels;
}

void write_labels(const std::filesystem::path& path, const std::vector<LabelEntry>& labels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& l : labels) out << l.clip_id << '\t' << l.label << '\t' << l.split << '\n';
}

void write_features_csv(const std::filesystem::path& path, const std::vector<ClipFeature>& features) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::size_t dims = features.empty() ? 0 : features.front().values.size();
  out << "clip_id,label,split";
  for (std::size_t d = 0; d < dims; ++d) out << ",v" << d;
  out << '\n';
  char buf[32];
  for (const auto& f : features) {
    if (f.values.size() != dims) throw std::invalid_argument("feature dimension differs for " + f.clip_id);
    if (f.clip_id.find(',') != std::string::npos) {
      throw std::invalid_argument("clip id contains a comma: " + f.clip_id);
    }
    out << f.clip_id << ',' << f.label << ',' << f.split;
    for (float v : f.values) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
      out << ',' << buf;
    }
    out << '\n';
  }
}

std::vector<ClipFeature> read_features_csv(const std::filesystem::path& path) {
  require_file(path);
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty feature file");
  const auto header = split(strip_cr(line), ',');
  if (header.size() < 3 || header[0] != "clip_id" || header[1] != "label" || header[2] != "split") {
    throw FormatError(path.string() + ": header must start with clip_id,label,split");
  }
  const std::size_t dims = header.size() - 3;
  std::vector<ClipFeature> features;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    auto parts = split(line, ',');
    if (parts.size() != dims + 3) {
      throw FormatError(where + ": expected " + std::to_string(dims + 3) + " fields, found " +
                        std::to_string(parts.size()));
    }
    ClipFeature f{parts[0], parse_int(parts[1], where), parts[2], {}};
    f.values.reserve(dims);
    for (std::size_t d = 0; d < dims; ++d) {
      char* end = nullptr;
      const float v = std::strtof(parts[d + 3].c_str(), &end);
      if (end == parts[d + 3].c_str() || *end != '\0') throw FormatError(where + ": bad number '" + parts[d + 3] + "'");
      f.values.push_back(v);
    }
    features.push_back(std::move(f));
  }
  return features;
}

std::string sha256_file(const std::filesystem::path& path) {
  require_file(path);
  std::ifstream in(path, std::ios::binary);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 unavailable");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 15];
  }
  return hex;
}

}  // namespace coala
