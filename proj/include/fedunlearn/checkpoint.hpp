#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "fedunlearn/model.hpp"

namespace fedunlearn {

// Checkpoint container, version 1. All integers little-endian.
//
//   offset  size  field
//   0       8     magic "FEDUNLRN"
//   8       4     u32 format version (1)
//   12      4     u32 length L of the architecture text
//   16      L     architecture text, see to_string(ArchSpec)
//   16+L    8     u64 weight count d
//   24+L    4d    weights, IEEE-754 binary32, flat order
inline constexpr char kCheckpointMagic[8] = {'F', 'E', 'D', 'U', 'N', 'L', 'R', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode_checkpoint(const ModelParams& model);
ModelParams decode_checkpoint(const std::string& bytes);

void save_checkpoint(const ModelParams& model, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace fedunlearn
