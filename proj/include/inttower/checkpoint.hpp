#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "inttower/params.hpp"

namespace inttower {

// Single-file model checkpoint, all integers and floats little-endian:
//
//   char[4]  magic "ITCK"
//   u32      format version (1)
//   u64      schema hash (FeatureSchema::hash)
//   u64      config text length, then that many bytes of resolved config
//   u32      parameter count
//   per parameter, in store order:
//     u32 name length, name bytes, u8 role, u32 rank, u64 dims[rank],
//     f64 values[product(dims)]
struct Checkpoint {
  std::uint64_t schema_hash = 0;
  std::string config_text;
  ParamStore params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace inttower
