#pragma once

// Versioned binary container of named tensor blocks plus string metadata.
//
// Layout (little-endian):
//   "MGVTCKPT" | u32 version | u32 reserved
//   str stage | u64 step
//   u32 n_meta  { str key | str value }
//   u32 n_block { str name | u8 dtype | u32 ndim | i64 dims[ndim] | u64 nbytes | bytes }
//   u64 fnv1a-64 of everything above
// where str = u32 length + bytes.

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include <torch/torch.h>

namespace mgvton {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string stage;
  std::uint64_t step = 0;
  std::map<std::string, std::string> metadata;
  std::map<std::string, torch::Tensor> blocks;

  // Parameters and buffers under "<prefix>/<dotted name>".
  void add_module(const std::string& prefix, const torch::nn::Module& module);
  // Strict: every parameter and buffer must be present with a matching shape.
  void load_module(const std::string& prefix, torch::nn::Module& module) const;

  void add_optimizer(const std::string& prefix, torch::optim::Adam& optimizer);
  void load_optimizer(const std::string& prefix, torch::optim::Adam& optimizer) const;

  const std::string& meta(const std::string& key) const;

  // Written to a temporary file and renamed into place.
  void save(const std::filesystem::path& path) const;
  // Throws CheckpointError naming the file on any format or checksum problem.
  static Checkpoint load(const std::filesystem::path& path);
};

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t hash = 0xcbf29ce484222325ULL);
// Hex FNV-1a digest of a file's bytes.
std::string file_digest(const std::filesystem::path& path);

}  // namespace mgvton
