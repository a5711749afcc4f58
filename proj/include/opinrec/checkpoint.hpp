#pragma once

// Binary checkpoint layout (all integers little-endian):
//
//   magic    "OPRC" (4 bytes)
//   version  u32 (= 1)
//   meta_len u32, meta bytes (UTF-8 JSON, may be empty)
//   count    u32
//   count x { name_len u32, name bytes, ndim u32, dims u64[ndim],
//             values f64[prod(dims)] }
//
// Tensors are written in name order so identical parameters give identical
// files.

#include <filesystem>
#include <string>

#include "opinrec/nn.hpp"

namespace opinrec {

inline constexpr char kCheckpointMagic[4] = {'O', 'P', 'R', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string metadata;
  nn::Parameters tensors;
};

void save_checkpoint(const std::filesystem::path& path, const nn::Parameters& params,
                     const std::string& metadata = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies values of every tensor in `source` into the same-named tensor of
/// `target`. Throws on missing names or shape mismatch.
void assign_parameters(nn::Parameters& target, const nn::Parameters& source);

}  // namespace opinrec
