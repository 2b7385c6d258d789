#include "fedunlearn/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>

#include "fedunlearn/rng.hpp"

namespace fedunlearn {

void ModelParams::validate() const {
  const std::size_t expected = param_count(arch);
  if (weights.size() != expected) {
    throw std::invalid_argument("model: " + std::to_string(weights.size()) + " weights, architecture needs " +
                                std::to_string(expected));
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights[i])) throw std::invalid_argument("model: non-finite weight at index " + std::to_string(i));
  }
}

ModelParams init_model(const ArchSpec& arch, std::uint64_t seed) {
  const auto shapes = layer_shapes(arch);
  ModelParams model{arch, {}};
  model.weights.reserve(param_count(arch));
  Rng rng(seed);
  Shape in = arch.input;
  for (std::size_t l = 0; l < arch.layers.size(); ++l) {
    std::size_t fan_in = 0;
    std::size_t n_weights = 0;
    std::size_t n_bias = 0;
    if (const auto* c = std::get_if<Conv2D>(&arch.layers[l])) {
      fan_in = static_cast<std::size_t>(c->kernel_h) * c->kernel_w * in.channels;
      n_weights = fan_in * c->out_channels;
      n_bias = c->out_channels;
    } else if (const auto* d = std::get_if<Dense>(&arch.layers[l])) {
      fan_in = in.size();
      n_weights = fan_in * d->units;
      n_bias = d->units;
    }
    if (n_weights > 0) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (std::size_t i = 0; i < n_weights; ++i) model.weights.push_back(static_cast<float>(rng.uniform(-bound, bound)));
      model.weights.insert(model.weights.end(), n_bias, 0.0f);
    }
    in = shapes[l];
  }
  return model;
}

ModelParams zero_model(const ArchSpec& arch) { return ModelParams{arch, std::vector<float>(param_count(arch), 0.0f)}; }

}  // namespace fedunlearn
