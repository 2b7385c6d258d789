#include "fedunlearn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fedunlearn {

void Batch::validate(int num_classes) const {
  if (features.size() != labels.size() * shape.size()) {
    throw std::invalid_argument("batch: " + std::to_string(features.size()) + " feature values for " +
                                std::to_string(labels.size()) + " labels of size " + std::to_string(shape.size()));
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw std::invalid_argument("batch: label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(num_classes) + ")");
    }
  }
}

std::size_t Dataset::poisoned_count() const {
  return static_cast<std::size_t>(std::count(poisoned.begin(), poisoned.end(), std::uint8_t{1}));
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out{shape, num_classes, {}, {}, {}, origin};
  out.features.reserve(indices.size() * shape.size());
  out.labels.reserve(indices.size());
  out.poisoned.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(*this, i);
  return out;
}

Batch Dataset::batch(std::span<const std::size_t> indices) const {
  Batch b{shape, {}, {}};
  b.features.reserve(indices.size() * shape.size());
  b.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    auto img = image(i);
    b.features.insert(b.features.end(), img.begin(), img.end());
    b.labels.push_back(labels[i]);
  }
  return b;
}

Batch Dataset::batch(std::size_t first, std::size_t count) const {
  const std::size_t n = shape.size();
  Batch b{shape, {}, {}};
  b.features.assign(features.begin() + static_cast<std::ptrdiff_t>(first * n),
                    features.begin() + static_cast<std::ptrdiff_t>((first + count) * n));
  b.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(first),
                  labels.begin() + static_cast<std::ptrdiff_t>(first + count));
  return b;
}

void Dataset::push_back(const Dataset& other, std::size_t index) {
  auto img = other.image(index);
  features.insert(features.end(), img.begin(), img.end());
  labels.push_back(other.labels[index]);
  poisoned.push_back(other.poisoned[index]);
}

void Dataset::validate() const {
  if (features.size() != labels.size() * shape.size() || poisoned.size() != labels.size()) {
    throw std::invalid_argument("dataset: field counts disagree");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw std::invalid_argument("dataset: label " + std::to_string(y) + " out of range");
  }
  for (float v : features) {
    if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("dataset: pixel value outside [0,1]");
  }
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.shape != b.shape || a.num_classes != b.num_classes) {
    throw std::invalid_argument("dataset: cannot concatenate datasets of different shape");
  }
  Dataset out = a;
  out.features.insert(out.features.end(), b.features.begin(), b.features.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.poisoned.insert(out.poisoned.end(), b.poisoned.begin(), b.poisoned.end());
  return out;
}

}  // namespace fedunlearn
