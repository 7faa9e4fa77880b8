// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#include "coala/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace coala {

namespace {
constexpr std::array<char, 6> kMagic{'C', 'O', 'A', 'L', 'A', '\x01'};
constexpr std::uint32_t kMaxRank = 8;
}  // namespace

namespace le {

void put_u32(std::ostream& out, std::uint32_t value) {
  const std::array<char, 4> bytes{static_cast<char>(value & 0xFF),
                                  static_cast<char>((value >> 8) & 0xFF),
                                  static_cast<char>((value >> 16) & 0xFF),
                                  static_cast<char>((value >> 24) & 0xFF)};
  out.write(bytes.data(), bytes.size());
}

void put_f32(std::ostream& out, float value) { put_u32(out, std::bit_cast<std::uint32_t>(value)); }

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw FormatError("unexpected end of stream");
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

}  // namespace le

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  out.write(kMagic.data(), kMagic.size());
  for (const auto& e : checkpoint.entries) {
    if (e.name.empty()) throw FormatError("checkpoint entry with empty name");
    if (shape_numel(e.shape) != e.values.size()) {
      throw FormatError("checkpoint entry '" + e.name + "' shape does not match its values");
    }
    le::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    le::put_u32(out, static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t extent : e.shape) le::put_u32(out, static_cast<std::uint32_t>(extent));
    for (float v : e.values) le::put_f32(out, v);
  }
  le::put_u32(out, 0);
  const std::string trailer = checkpoint.config.dump();
  le::put_u32(out, static_cast<std::uint32_t>(trailer.size()));
  out.write(trailer.data(), static_cast<std::streamsize>(trailer.size()));
  if (!out) throw FormatError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, kMagic.size()> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw FormatError("not a COALA checkpoint (bad magic)");
  Checkpoint checkpoint;
  while (true) {
    const std::uint32_t name_len = le::get_u32(in);
    if (name_len == 0) break;
    if (name_len > 4096) throw FormatError("checkpoint entry name length is corrupt");
    CheckpointEntry e;
    e.name.resize(name_len);
    in.read(e.name.data(), name_len);
    const std::uint32_t rank = le::get_u32(in);
    if (rank > kMaxRank) throw FormatError("checkpoint entry '" + e.name + "' has absurd rank");
    for (std::uint32_t i = 0; i < rank; ++i) e.shape.push_back(le::get_u32(in));
    e.values.resize(shape_numel(e.shape));
    for (float& v : e.values) v = le::get_f32(in);
    checkpoint.entries.push_back(std::move(e));
  }
  const std::uint32_t trailer_len = le::get_u32(in);
  std::string trailer(trailer_len, '\0');
  in.read(trailer.data(), trailer_len);
  if (!in) throw FormatError("truncated checkpoint trailer");
  try {
    checkpoint.config = nlohmann::json::parse(trailer);
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("checkpoint trailer is not JSON: ") + ex.what());
  }
  return checkpoint;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    write_checkpoint(out, checkpoint);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace coala
