#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fedunlearn {

enum class Activation { none, relu };
enum class Padding { same, valid };

/// Height x width x channels, HWC memory order.
struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
           static_cast<std::size_t>(channels);
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Stride-1 convolution. Weights are laid out [out][kh][kw][in], followed by one bias per
/// output channel. Same padding zero-pads by (k-1)/2 on the leading edge.
struct Conv2D {
  int out_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  Activation activation = Activation::relu;
  Padding padding = Padding::same;
  friend bool operator==(const Conv2D&, const Conv2D&) = default;
};

/// Non-overlapping max pooling (window = stride = size); trailing rows/cols are dropped.
struct MaxPool {
  int size = 2;
  friend bool operator==(const MaxPool&, const MaxPool&) = default;
};

/// Fully connected layer over the flattened input. Weights are [units][in] then biases.
struct Dense {
  int units = 0;
  Activation activation = Activation::none;
  friend bool operator==(const Dense&, const Dense&) = default;
};

using Layer = std::variant<Conv2D, MaxPool, Dense>;

/// Network architecture. The last layer must be Dense; its units are the class count
/// and its output feeds a softmax.
struct ArchSpec {
  Shape input;
  std::vector<Layer> layers;

  int num_classes() const;
  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

/// Output shape of every layer, in order. Throws std::invalid_argument when the shapes
/// do not chain (e.g. a kernel larger than its input).
std::vector<Shape> layer_shapes(const ArchSpec& arch);

/// Weights plus biases of a single layer given its input shape.
std::size_t layer_param_count(const Layer& layer, const Shape& input);

std::size_t param_count(const ArchSpec& arch);

std::string layer_name(const Layer& layer);

/// Two 5x5 conv layers (32, 64 channels) each followed by 2x2 max pooling, a 512-unit
/// ReLU layer and a 10-way output, on 28x28x1 input. ReLU after each conv is assumed.
ArchSpec paper_cnn();

/// Multi-layer perceptron with ReLU hidden layers.
ArchSpec mlp(Shape input, const std::vector<int>& hidden, int num_classes);

/// Text form, e.g. "input:28x28x1,conv:32:5x5:relu:same,pool:2,dense:512:relu,dense:10".
std::string to_string(const ArchSpec& arch);
ArchSpec parse_arch(std::string_view text);

/// Parses layers only ("dense:200:relu,dense:10") or a preset name ("paper-cnn",
/// "mlp:200" for one hidden layer, "mlp:256x128" for two) against a given input shape.
ArchSpec parse_layers(std::string_view text, Shape input);

}  // namespace fedunlearn
