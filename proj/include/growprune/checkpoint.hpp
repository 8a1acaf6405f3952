// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint layout (all integers and floats little-endian):
//
//   "GPCK"            4-byte magic
//   u32 version       currently 1
//   u64 header_len    followed by header_len bytes of UTF-8 JSON:
//                     {"model": ModelConfig, "step": N, "tensors": [names]}
//   per tensor, in declaration order (embedding.0..F-1, then per FC layer
//   <name>.weight, <name>.bias):
//     u64 count, count x f32
//   per FC layer: u64 length, length x u8 mask flags (1 = keep)

#pragma once

#include <filesystem>
#include <iosfwd>

#include <nlohmann/json.hpp>

#include "growprune/model.hpp"

namespace growprune {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const ModelState& state);
ModelState read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ModelState& state);
ModelState load_checkpoint(const std::filesystem::path& path);

/// Human-readable description: config, step, per-layer active neurons, and
/// whether every mask is all-keep.
nlohmann::json describe_checkpoint(const ModelState& state);

}  // namespace growprune
