#include <cmath>
#include <stdexcept>
#include "doctest.h"
#include "fedunlearn/arch.hpp"
#include "fedunlearn/model.hpp"

using namespace fedunlearn;

TEST_CASE("param_count of the two-conv MNIST CNN") {
  CHECK(param_count(paper_cnn()) == 1'663'370);
}

TEST_CASE("param_count small cases") {
  const ArchSpec single{Shape{1, 1, 4}, {Dense{10, Activation::none}}};
  CHECK(param_count(single) == 50);
  // 784*64 + 64 + 64*10 + 10
  const auto small_mlp = mlp(Shape{28, 28, 1}, {64}, 10);
  CHECK(param_count(small_mlp) == 50'890);
}

TEST_CASE("valid padding shrinks the feature maps") {
  ArchSpec arch = paper_cnn();
  std::get<Conv2D>(arch.layers[0]).padding = Padding::valid;
  std::get<Conv2D>(arch.layers[2]).padding = Padding::valid;
  const auto shapes = layer_shapes(arch);
  CHECK((shapes[0] == Shape{24, 24, 32}));
  CHECK((shapes[3] == Shape{4, 4, 64}));
  CHECK(param_count(arch) == 582'026);
}

TEST_CASE("inconsistent shape chains are rejected") {
  ArchSpec too_big{Shape{4, 4, 1}, {Conv2D{2, 5, 5, Activation::relu, Padding::valid}, Dense{2}}};
  CHECK_THROWS_AS(param_count(too_big), std::invalid_argument);
  ArchSpec pool_too_big{Shape{1, 1, 3}, {MaxPool{2}, Dense{2}}};
  CHECK_THROWS_AS(param_count(pool_too_big), std::invalid_argument);
  ArchSpec no_dense_tail{Shape{4, 4, 1}, {Conv2D{2, 3, 3}}};
  CHECK_THROWS_AS(param_count(no_dense_tail), std::invalid_argument);
  const ArchSpec empty{Shape{4, 4, 1}, {}};
  CHECK_THROWS_AS(param_count(empty), std::invalid_argument);
}

TEST_CASE("architecture text round-trips") {
  for (const auto& arch : {paper_cnn(), mlp(Shape{8, 8, 1}, {32, 16}, 10)}) {
    CHECK(parse_arch(to_string(arch)) == arch);
  }
  CHECK(to_string(paper_cnn()) == "input:28x28x1,conv:32:5x5:relu:same,pool:2,conv:64:5x5:relu:same,pool:2,"
                                  "dense:512:relu,dense:10:none");
  CHECK_THROWS_AS(parse_arch("dense:10"), std::invalid_argument);
  CHECK_THROWS_AS(parse_arch("input:28x28x1,dense:ten"), std::invalid_argument);
}

TEST_CASE("layer presets take the input shape from the data") {
  const Shape mnist{28, 28, 1};
  CHECK(param_count(parse_layers("paper-cnn", mnist)) == 1'663'370);
  CHECK(param_count(parse_layers("mlp:64", mnist)) == 50'890);
  const Shape small{8, 8, 1};
  CHECK(parse_layers("dense:16:relu,dense:10", small).num_classes() == 10);
}

TEST_CASE("fan-in initialization bounds and zero biases") {
  const auto arch = mlp(Shape{4, 4, 1}, {8}, 3);
  const auto m = init_model(arch, 42);
  m.validate();
  const float bound1 = 1.0f / 4.0f;                 // fan_in 16
  const float bound2 = 1.0f / std::sqrt(8.0f);      // fan_in 8
  for (std::size_t i = 0; i < 128; ++i) CHECK(std::abs(m.weights[i]) <= bound1);
  for (std::size_t i = 128; i < 136; ++i) CHECK(m.weights[i] == 0.0f);
  for (std::size_t i = 136; i < 160; ++i) CHECK(std::abs(m.weights[i]) <= bound2);
  for (std::size_t i = 160; i < 163; ++i) CHECK(m.weights[i] == 0.0f);
  CHECK(init_model(arch, 42) == m);
  CHECK_FALSE(init_model(arch, 43) == m);
}
