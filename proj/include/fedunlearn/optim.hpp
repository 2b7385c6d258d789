#pragma once

#include <span>
#include <vector>

#include "fedunlearn/model.hpp"

namespace fedunlearn {

enum class Direction { descent, ascent };

/// Transient SGD-with-momentum state. Velocity is kept in double.
struct OptimizerState {
  std::vector<double> velocity;
  double momentum = 0.9;
  double learning_rate = 0.01;

  static OptimizerState fresh(std::size_t dim, double momentum, double learning_rate);
};

/// v <- momentum * v + grad; w <- w -/+ learning_rate * v.
void sgd_step(ModelParams& model, std::span<const double> grad, OptimizerState& state, Direction direction);

}  // namespace fedunlearn
