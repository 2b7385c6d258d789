#include "fedunlearn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace fedunlearn {
namespace {

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const std::string& in, std::size_t& pos) {
  if (in.size() < pos + sizeof(U)) throw CheckpointError("checkpoint: truncated");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(U);
  return value;
}

}  // namespace

std::string encode_checkpoint(const ModelParams& model) {
  const std::string arch = to_string(model.arch);
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(arch.size()));
  out += arch;
  put_le<std::uint64_t>(out, model.weights.size());
  out.reserve(out.size() + 4 * model.weights.size());
  for (float w : model.weights) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(w));
  return out;
}

ModelParams decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw CheckpointError("checkpoint: bad magic");
  }
  std::size_t pos = sizeof(kCheckpointMagic);
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto arch_len = get_le<std::uint32_t>(bytes, pos);
  if (bytes.size() < pos + arch_len) throw CheckpointError("checkpoint: truncated");
  ModelParams model;
  try {
    model.arch = parse_arch(bytes.substr(pos, arch_len));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
  pos += arch_len;
  const auto count = get_le<std::uint64_t>(bytes, pos);
  if (count != param_count(model.arch)) throw CheckpointError("checkpoint: weight count does not match architecture");
  if ((bytes.size() - pos) / 4 < count) throw CheckpointError("checkpoint: truncated");
  model.weights.resize(count);
  for (auto& w : model.weights) w = std::bit_cast<float>(get_le<std::uint32_t>(bytes, pos));
  if (pos != bytes.size()) throw CheckpointError("checkpoint: trailing bytes");
  return model;
}

void save_checkpoint(const ModelParams& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot write " + path.string());
  const auto bytes = encode_checkpoint(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("checkpoint: write failed for " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace fedunlearn
