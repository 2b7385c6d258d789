#include <cmath>
#include <stdexcept>
#include <random>

#include "../support/oracles.hpp"
#include "doctest.h"
#include "fedunlearn/model.hpp"
#include "fedunlearn/optim.hpp"
#include "fedunlearn/vector_ops.hpp"

using namespace fedunlearn;

namespace {
ModelParams scalar_model(float w) {
  ArchSpec arch{Shape{1, 1, 0}, {}};
  return ModelParams{arch, {w}};
}
}  // namespace

TEST_CASE("momentum step on a scalar") {
  auto m = scalar_model(1.0f);
  OptimizerState st{{0.1}, 0.9, 0.01};
  const std::vector<double> g{2.0};
  sgd_step(m, g, st, Direction::descent);
  CHECK(st.velocity[0] == doctest::Approx(2.09));
  CHECK(static_cast<double>(m.weights[0]) == doctest::Approx(1.0 - 0.0209).epsilon(1e-6));
}

TEST_CASE("ascent mirrors descent") {
  std::mt19937_64 gen(3);
  for (int t = 0; t < 20; ++t) {
    const auto g = oracle::random_vector(gen, 6, 2.0);
    auto a = scalar_model(0.0f);
    a.weights.assign(6, 0.5f);
    auto d = a;
    auto sa = OptimizerState::fresh(6, 0.9, 0.05);
    auto sd = sa;
    sgd_step(a, g, sa, Direction::ascent);
    sgd_step(d, g, sd, Direction::descent);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(static_cast<double>(a.weights[i]) - 0.5 == doctest::Approx(0.5 - static_cast<double>(d.weights[i])).epsilon(1e-5));
    }
  }
}

TEST_CASE("gradient clipping") {
  const std::vector<double> big{3.0, 4.0};
  const auto c = clip_grad<double>(big, 1.0);
  CHECK(c[0] == doctest::Approx(0.6));
  CHECK(c[1] == doctest::Approx(0.8));
  const auto same = clip_grad<double>(big, 10.0);
  CHECK(same == big);

  std::mt19937_64 gen(11);
  for (int t = 0; t < 200; ++t) {
    const auto g = oracle::random_vector(gen, 1 + t % 17, 1.0 + t % 5);
    const double r = 0.1 + 0.05 * (t % 40);
    const auto out = clip_grad<double>(g, r);
    CHECK(oracle::norm(out) <= r * (1.0 + 1e-12));
    // Direction is preserved: out is a non-negative multiple of g.
    const double ratio = oracle::norm(out) / oracle::norm(g);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(out[i] == doctest::Approx(g[i] * ratio));
  }
  CHECK_THROWS_AS(clip_grad<double>(big, 0.0), std::invalid_argument);
}

TEST_CASE("projection onto the ball") {
  const std::vector<float> center{0.0f, 0.0f};
  const std::vector<float> far{0.0f, 3.0f};
  const auto p = project_l2<float>(far, center, 1.0);
  CHECK(p[0] == 0.0f);
  CHECK(p[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(project_l2<float>(p, center, 1.0) == p);  // idempotent

  std::mt19937_64 gen(5);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(t % 50);
    std::vector<float> w(n), c(n);
    for (auto& x : w) x = u(gen) * 10.0f;
    for (auto& x : c) x = u(gen);
    const double delta = 0.01 + (t % 30) * 0.2;
    const auto q = project_l2<float>(w, c, delta);
    CHECK(oracle::distance(q, c) <= delta);
    if (oracle::distance(w, c) <= delta) {
      CHECK(q == w);
    } else {
      CHECK(oracle::distance(q, c) == doctest::Approx(delta).epsilon(1e-5));
    }
    CHECK(project_l2<float>(q, c, delta) == q);
  }
  const std::vector<float> short_vec{1.0f};
  CHECK_THROWS_AS(project_l2<float>(far, short_vec, 1.0), std::invalid_argument);
}
