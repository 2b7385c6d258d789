#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedunlearn/arch.hpp"

namespace fedunlearn {

/// A mini-batch: `size()` images of `shape` (HWC, values in [0,1]) and class indices.
struct Batch {
  Shape shape;
  std::vector<float> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const float> image(std::size_t i) const {
    return std::span<const float>(features).subspan(i * shape.size(), shape.size());
  }
  /// Throws std::invalid_argument if counts disagree or labels fall outside [0, num_classes).
  void validate(int num_classes) const;
};

enum class Origin { train, test };

/// Labelled images with per-example poison flags.
struct Dataset {
  Shape shape;
  int num_classes = 10;
  std::vector<float> features;
  std::vector<int> labels;
  std::vector<std::uint8_t> poisoned;
  Origin origin = Origin::train;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::size_t poisoned_count() const;

  std::span<const float> image(std::size_t i) const {
    return std::span<const float>(features).subspan(i * shape.size(), shape.size());
  }
  std::span<float> image(std::size_t i) { return std::span<float>(features).subspan(i * shape.size(), shape.size()); }

  /// Copies the listed examples (in order) into a new dataset.
  Dataset subset(std::span<const std::size_t> indices) const;
  Batch batch(std::span<const std::size_t> indices) const;
  /// Contiguous range [first, first + count) as a batch.
  Batch batch(std::size_t first, std::size_t count) const;
  void push_back(const Dataset& other, std::size_t index);

  /// Throws std::invalid_argument when field counts disagree, labels are out of range or
  /// pixels leave [0,1].
  void validate() const;
};

Dataset concat(const Dataset& a, const Dataset& b);

}  // namespace fedunlearn
