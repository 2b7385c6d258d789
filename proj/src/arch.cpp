#include "fedunlearn/arch.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

namespace fedunlearn {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

int parse_int(std::string_view s, std::string_view context) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || value <= 0) {
    throw std::invalid_argument("arch: expected a positive integer in '" + std::string(context) +
                                "', got '" + std::string(s) + "'");
  }
  return value;
}

Activation parse_activation(std::string_view s, std::string_view context) {
  if (s == "relu") return Activation::relu;
  if (s == "none" || s == "linear") return Activation::none;
  throw std::invalid_argument("arch: unknown activation '" + std::string(s) + "' in '" +
                              std::string(context) + "'");
}

Layer parse_layer(std::string_view item) {
  auto parts = split(item, ':');
  const std::string_view kind = parts[0];
  if (kind == "conv") {
    if (parts.size() < 3 || parts.size() > 5) {
      throw std::invalid_argument("arch: conv layer must be conv:<out>:<kh>x<kw>[:act][:pad], got '" +
                                  std::string(item) + "'");
    }
    Conv2D c;
    c.out_channels = parse_int(parts[1], item);
    auto k = split(parts[2], 'x');
    if (k.size() != 2) throw std::invalid_argument("arch: bad kernel size in '" + std::string(item) + "'");
    c.kernel_h = parse_int(k[0], item);
    c.kernel_w = parse_int(k[1], item);
    if (parts.size() >= 4) c.activation = parse_activation(parts[3], item);
    if (parts.size() == 5) {
      if (parts[4] == "same") {
        c.padding = Padding::same;
      } else if (parts[4] == "valid") {
        c.padding = Padding::valid;
      } else {
        throw std::invalid_argument("arch: unknown padding '" + std::string(parts[4]) + "'");
      }
    }
    return c;
  }
  if (kind == "pool") {
    if (parts.size() != 2) throw std::invalid_argument("arch: pool layer must be pool:<size>");
    return MaxPool{parse_int(parts[1], item)};
  }
  if (kind == "dense") {
    if (parts.size() < 2 || parts.size() > 3) {
      throw std::invalid_argument("arch: dense layer must be dense:<units>[:act], got '" +
                                  std::string(item) + "'");
    }
    Dense d;
    d.units = parse_int(parts[1], item);
    if (parts.size() == 3) d.activation = parse_activation(parts[2], item);
    return d;
  }
  throw std::invalid_argument("arch: unknown layer kind '" + std::string(kind) + "'");
}

Shape parse_shape(std::string_view s) {
  auto dims = split(s, 'x');
  if (dims.size() != 3) throw std::invalid_argument("arch: input shape must be HxWxC, got '" + std::string(s) + "'");
  return Shape{parse_int(dims[0], s), parse_int(dims[1], s), parse_int(dims[2], s)};
}

const char* activation_name(Activation a) { return a == Activation::relu ? "relu" : "none"; }

}  // namespace

int ArchSpec::num_classes() const {
  if (layers.empty() || !std::holds_alternative<Dense>(layers.back())) {
    throw std::invalid_argument("arch: last layer must be dense");
  }
  return std::get<Dense>(layers.back()).units;
}

std::vector<Shape> layer_shapes(const ArchSpec& arch) {
  if (arch.input.size() == 0) throw std::invalid_argument("arch: input shape has zero size");
  if (arch.layers.empty()) throw std::invalid_argument("arch: no layers");
  std::vector<Shape> shapes;
  shapes.reserve(arch.layers.size());
  Shape cur = arch.input;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto where = "arch: layer " + std::to_string(i) + " (" + layer_name(arch.layers[i]) + ")";
    cur = std::visit(
        Overloaded{
            [&](const Conv2D& c) {
              if (c.out_channels <= 0 || c.kernel_h <= 0 || c.kernel_w <= 0) {
                throw std::invalid_argument(where + ": non-positive size");
              }
              if (c.padding == Padding::same) return Shape{cur.height, cur.width, c.out_channels};
              if (c.kernel_h > cur.height || c.kernel_w > cur.width) {
                throw std::invalid_argument(where + ": kernel larger than input " +
                                            std::to_string(cur.height) + "x" + std::to_string(cur.width));
              }
              return Shape{cur.height - c.kernel_h + 1, cur.width - c.kernel_w + 1, c.out_channels};
            },
            [&](const MaxPool& p) {
              if (p.size <= 0) throw std::invalid_argument(where + ": non-positive pool size");
              if (p.size > cur.height || p.size > cur.width) {
                throw std::invalid_argument(where + ": pool window larger than input");
              }
              return Shape{cur.height / p.size, cur.width / p.size, cur.channels};
            },
            [&](const Dense& d) {
              if (d.units <= 0) throw std::invalid_argument(where + ": non-positive units");
              return Shape{1, 1, d.units};
            }},
        arch.layers[i]);
    shapes.push_back(cur);
  }
  if (!std::holds_alternative<Dense>(arch.layers.back())) {
    throw std::invalid_argument("arch: last layer must be dense");
  }
  return shapes;
}

std::size_t layer_param_count(const Layer& layer, const Shape& input) {
  return std::visit(Overloaded{[&](const Conv2D& c) {
                                 const auto per_out = static_cast<std::size_t>(c.kernel_h) * c.kernel_w *
                                                      input.channels;
                                 return static_cast<std::size_t>(c.out_channels) * (per_out + 1);
                               },
                               [](const MaxPool&) { return std::size_t{0}; },
                               [&](const Dense& d) { return static_cast<std::size_t>(d.units) * (input.size() + 1); }},
                    layer);
}

std::size_t param_count(const ArchSpec& arch) {
  const auto shapes = layer_shapes(arch);
  std::size_t total = 0;
  Shape in = arch.input;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    total += layer_param_count(arch.layers[i], in);
    in = shapes[i];
  }
  return total;
}

std::string layer_name(const Layer& layer) {
  return std::visit(Overloaded{[](const Conv2D& c) {
                                 return "conv:" + std::to_string(c.out_channels) + ":" + std::to_string(c.kernel_h) +
                                        "x" + std::to_string(c.kernel_w) + ":" + activation_name(c.activation) +
                                        ":" + (c.padding == Padding::same ? "same" : "valid");
                               },
                               [](const MaxPool& p) { return "pool:" + std::to_string(p.size); },
                               [](const Dense& d) {
                                 return "dense:" + std::to_string(d.units) + ":" + activation_name(d.activation);
                               }},
                    layer);
}

ArchSpec paper_cnn() {
  return ArchSpec{Shape{28, 28, 1},
                  {Conv2D{32, 5, 5, Activation::relu, Padding::same}, MaxPool{2},
                   Conv2D{64, 5, 5, Activation::relu, Padding::same}, MaxPool{2}, Dense{512, Activation::relu},
                   Dense{10, Activation::none}}};
}

ArchSpec mlp(Shape input, const std::vector<int>& hidden, int num_classes) {
  ArchSpec arch{input, {}};
  for (int h : hidden) arch.layers.emplace_back(Dense{h, Activation::relu});
  arch.layers.emplace_back(Dense{num_classes, Activation::none});
  return arch;
}

std::string to_string(const ArchSpec& arch) {
  std::ostringstream os;
  os << "input:" << arch.input.height << "x" << arch.input.width << "x" << arch.input.channels;
  for (const auto& l : arch.layers) os << "," << layer_name(l);
  return os.str();
}

ArchSpec parse_arch(std::string_view text) {
  auto items = split(trim(text), ',');
  auto head = trim(items.front());
  if (!head.starts_with("input:")) throw std::invalid_argument("arch: text must start with input:HxWxC");
  head.remove_prefix(6);
  ArchSpec arch{parse_shape(head), {}};
  for (std::size_t i = 1; i < items.size(); ++i) arch.layers.push_back(parse_layer(trim(items[i])));
  layer_shapes(arch);
  return arch;
}

ArchSpec parse_layers(std::string_view text, Shape input) {
  text = trim(text);
  if (text == "paper-cnn") {
    ArchSpec arch = paper_cnn();
    arch.input = input;
    layer_shapes(arch);
    return arch;
  }
  if (text.starts_with("mlp:")) {
    std::vector<int> hidden;
    for (auto h : split(text.substr(4), 'x')) hidden.push_back(parse_int(h, text));
    ArchSpec arch = mlp(input, hidden, 10);
    layer_shapes(arch);
    return arch;
  }
  ArchSpec arch{input, {}};
  for (auto item : split(text, ',')) arch.layers.push_back(parse_layer(trim(item)));
  layer_shapes(arch);
  return arch;
}

}  // namespace fedunlearn
