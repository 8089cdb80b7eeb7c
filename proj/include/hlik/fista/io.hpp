// SPDX-License-Identifier: Apache-2.0
//
// Binary model file, all integers and floats little-endian:
//   "FSTA"                      magic
//   u16  version                (kFormatVersion)
//   u8   architecture, u8 ablation
//   u32  history, embed, gru_hidden, attn_dim, film_hidden
//   u32  n, then n x u32        head widths
//   u32  n, then n x u32        MLP widths
//   f64  x 14 frame mean, x 14 frame std, x 7 target mean, x 7 target std,
//        x 7 label mean, x 7 label std
//   u64  parameter count, then that many f64 in ParamLayout order
//   u64  FNV-1a 64 hash of every preceding byte
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hlik/fista/model.hpp"

namespace hlik::fista {

inline constexpr uint16_t kFormatVersion = 1;

std::string serialize(const Model& model);
/// Throws FormatError (bad magic, truncation, inconsistent sizes, checksum)
/// or VersionMismatch (any version other than kFormatVersion).
Model deserialize(const std::string& bytes);

void save_model(const std::filesystem::path& path, const Model& model);
/// Also throws IoError when the file cannot be read.
Model load_model(const std::filesystem::path& path);

uint64_t fnv1a64(const void* data, size_t size);

}  // namespace hlik::fista
