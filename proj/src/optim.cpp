#include "fedunlearn/optim.hpp"

#include <stdexcept>
#include <string>

namespace fedunlearn {

OptimizerState OptimizerState::fresh(std::size_t dim, double momentum, double learning_rate) {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("optimizer: momentum must be in [0, 1)");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("optimizer: learning rate must be positive");
  return OptimizerState{std::vector<double>(dim, 0.0), momentum, learning_rate};
}

void sgd_step(ModelParams& model, std::span<const double> grad, OptimizerState& state, Direction direction) {
  if (grad.size() != model.weights.size() || state.velocity.size() != model.weights.size()) {
    throw std::invalid_argument("sgd_step: dimension mismatch (weights " + std::to_string(model.weights.size()) +
                                ", grad " + std::to_string(grad.size()) + ", velocity " +
                                std::to_string(state.velocity.size()) + ")");
  }
  const double sign = direction == Direction::descent ? -1.0 : 1.0;
  const double step = sign * state.learning_rate;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    state.velocity[i] = state.momentum * state.velocity[i] + grad[i];
    model.weights[i] = static_cast<float>(static_cast<double>(model.weights[i]) + step * state.velocity[i]);
  }
}

}  // namespace fedunlearn
