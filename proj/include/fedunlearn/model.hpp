#pragma once

#include <cstdint>
#include <vector>

#include "fedunlearn/arch.hpp"

namespace fedunlearn {

/// Architecture plus its flat weight vector (layer by layer, weights then biases).
struct ModelParams {
  ArchSpec arch;
  std::vector<float> weights;

  std::size_t dim() const { return weights.size(); }
  /// Throws if the weight count differs from param_count(arch) or any entry is not finite.
  void validate() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Fan-in uniform initialization: each layer's weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)],
/// biases zero.
ModelParams init_model(const ArchSpec& arch, std::uint64_t seed);

ModelParams zero_model(const ArchSpec& arch);

}  // namespace fedunlearn
