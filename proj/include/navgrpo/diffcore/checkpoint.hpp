#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "navgrpo/diffcore/adam.hpp"
#include "navgrpo/diffcore/param_store.hpp"

namespace navgrpo::diff {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Named parameter tensors with trainable flags, optimizer moments and the
// hashes of the configuration that produced them.
struct Checkpoint {
  ParamStore params;
  Adam optimizer;
  std::uint64_t config_hash = 0;  // full run configuration
  std::uint64_t model_hash = 0;   // architecture and diffusion schedule only
  std::string metadata;           // free-form JSON
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace navgrpo::diff
