#pragma once

// Binary checkpoints. Layout, all integers and floats little-endian:
//   "GMCFCKP1"
//   u64 dim, u64 universe size, u32 variant length + variant string,
//   u32 mlp depth, u32 MLP array count, u32 GRU array count,
//   u64 parameter scalar count
//   per attribute in id order: u8 side, u32 name length + UTF-8 name
//   f64 parameter values in registry order
//   u64 FNV-1a hash of everything above

#include <filesystem>
#include <string>
#include <string_view>

#include "gmcf/core.hpp"
#include "gmcf/model.hpp"

namespace gmcf {

struct Checkpoint {
  ModelParams params;
  Vocabulary vocab;
};

std::string encode_checkpoint(const ModelParams& params, const Vocabulary& vocab);

// Throws UnsupportedFormatError (wrong magic), UnsupportedVersionError
// (another format version) or CorruptCheckpointError (truncation, size or
// checksum mismatch). Nothing is returned on failure.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const ModelParams& params, const Vocabulary& vocab, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gmcf
