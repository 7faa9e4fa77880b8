// Copyright 2026 The COALA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coala/tensor.hpp"

namespace coala {

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

/// Binary layout (all integers little-endian):
///   "COALA\x01"
///   repeated { u32 name_len, name bytes, u32 rank, u32 extents[rank], f32 values[] }
///   u32 0                      -- end-of-records marker (empty name)
///   u32 json_len, json bytes   -- config trailer
struct Checkpoint {
  std::vector<CheckpointEntry> entries;
  nlohmann::json config = nlohmann::json::object();

  const CheckpointEntry* find(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);

/// Writes atomically via a sibling temporary file.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

namespace le {
void put_u32(std::ostream& out, std::uint32_t value);
void put_f32(std::ostream& out, float value);
std::uint32_t get_u32(std::istream& in);
float get_f32(std::istream& in);
}  // namespace le

}  // namespace coala
