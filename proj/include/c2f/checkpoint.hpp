#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "c2f/nn.hpp"

namespace c2f {

// Checkpoint container: a flat, ordered list of named tensors.
//
// Binary layout (little-endian):
//   magic   "C2FCKPT1"                                 8 bytes
//   u32     format version (1)
//   u64     config fingerprint
//   u32     record count
//   records: u32 name length, name bytes,
//            u32 ndim, u32 dims[ndim],
//            f64 values[prod(dims)]
//
// Saving the result of a load reproduces the input file byte for byte.

struct CheckpointRecord {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::uint64_t fingerprint = 0;
  std::vector<CheckpointRecord> records;
};

void save_checkpoint(const std::filesystem::path& path, std::uint64_t fingerprint, const nn::NamedParams& params);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies records into `params`, enforcing identical order, names and
/// shapes, and that the stored fingerprint matches `expected_fingerprint`.
void load_checkpoint(const std::filesystem::path& path, std::uint64_t expected_fingerprint,
                     const nn::NamedParams& params);

std::uint64_t fnv1a64(std::span<const unsigned char> bytes);
std::uint64_t fnv1a64(const std::string& text);
/// FNV-1a over a file's raw bytes; used to verify frozen models.
std::uint64_t hash_file(const std::filesystem::path& path);

}  // namespace c2f
