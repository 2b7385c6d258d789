#pragma once

#include <span>
#include <vector>

#include "fedunlearn/dataset.hpp"
#include "fedunlearn/model.hpp"

namespace fedunlearn {

/// Row-major batch x classes matrix of softmax outputs.
template <typename Real>
struct BasicProbabilities {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Real> values;

  Real at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const Real> row(std::size_t r) const { return std::span<const Real>(values).subspan(r * cols, cols); }
};
using Probabilities = BasicProbabilities<float>;

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// Forward pass and mean cross-entropy gradient. Activations are computed in the weight
// type; loss and gradient are accumulated in double. The double overloads exist for
// finite-difference checks. Non-finite activations throw std::runtime_error naming the
// layer.

Probabilities forward(const ModelParams& model, const Batch& batch);
BasicProbabilities<double> forward(const ArchSpec& arch, std::span<const double> weights, const Batch& batch);

LossAndGrad loss_and_grad(const ModelParams& model, const Batch& batch);
LossAndGrad loss_and_grad(const ArchSpec& arch, std::span<const double> weights, const Batch& batch);

/// Mean cross-entropy only (no gradient). Non-empty batch required.
double batch_loss(const ArchSpec& arch, std::span<const double> weights, const Batch& batch);

/// Argmax class per example; ties go to the lowest class index.
std::vector<int> predict(const ModelParams& model, const Dataset& data);

/// Fraction of examples whose predicted class equals the stored label.
double evaluate_accuracy(const ModelParams& model, const Dataset& data);

/// Mean cross-entropy over a whole dataset.
double dataset_loss(const ModelParams& model, const Dataset& data);

}  // namespace fedunlearn
