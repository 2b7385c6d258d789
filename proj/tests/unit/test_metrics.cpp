#include <cmath>
#include <stdexcept>

#include "../support/fixtures.hpp"
#include "doctest.h"
#include "fedunlearn/metrics.hpp"

using namespace fedunlearn;

namespace {

std::vector<MetricsRecord> series(Phase phase, int first_round, std::vector<double> clean) {
  std::vector<MetricsRecord> out;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    out.push_back(MetricsRecord{phase, first_round + static_cast<int>(i), clean[i], 0.1, 0, 0.0});
  }
  return out;
}

// First record whose clean accuracy reaches the target, by linear scan over (round, acc) pairs.
std::optional<int> first_reaching(const std::vector<MetricsRecord>& s, double target) {
  std::optional<int> best;
  for (const auto& r : s) {
    if (r.clean_acc >= target && (!best || r.round < *best)) best = r.round;
  }
  return best;
}

}  // namespace

TEST_CASE("clean and backdoor accuracy of constant predictors") {
  const auto arch = mlp(Shape{2, 2, 1}, {3}, 10);
  auto test = fixtures::random_dataset(30, arch.input, 10, 1);
  for (std::size_t i = 0; i < 30; ++i) test.labels[i] = static_cast<int>(i % 3);  // 10 of each of 0, 1, 2
  CHECK(clean_accuracy(fixtures::constant_predictor(arch, 1), test) == doctest::Approx(1.0 / 3.0));
  CHECK(backdoor_accuracy(fixtures::constant_predictor(arch, 9), test, 9) == 1.0);
  CHECK(backdoor_accuracy(fixtures::constant_predictor(arch, 2), test, 9) == 0.0);

  const Evaluator eval{&test, nullptr, 9};
  const auto [clean, bd] = eval(fixtures::constant_predictor(arch, 0));
  CHECK(clean == doctest::Approx(1.0 / 3.0));
  CHECK(std::isnan(bd));
}

TEST_CASE("identical series give zero gaps") {
  const auto u = series(Phase::posttrain, 1, {0.5, 0.8, 0.9});
  auto r = u;
  for (auto& x : r) x.phase = Phase::retrain;
  const auto cmp = compare_recovery(u, r, 3);
  REQUIRE(cmp.rows.size() == 3);
  for (const auto& row : cmp.rows) {
    REQUIRE(row.clean_gap.has_value());
    CHECK(*row.clean_gap == 0.0);
  }
}

TEST_CASE("rounds-to-target agrees with an independent scan") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> acc(0.3, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> uc(1 + static_cast<std::size_t>(t % 4)), rc(3 + static_cast<std::size_t>(t % 10));
    for (auto& x : uc) x = acc(gen);
    for (auto& x : rc) x = acc(gen);
    const auto u = series(Phase::posttrain, 0, uc);
    const auto r = series(Phase::retrain, 1, rc);
    const auto cmp = compare_recovery(u, r, 100, 0.02);
    const double target = rc.back() - 0.02;
    CHECK(cmp.target_clean == doctest::Approx(target));
    CHECK(cmp.unlearn_rounds_to_target == first_reaching(u, target));
    CHECK(cmp.retrain_rounds_to_target == first_reaching(r, target));
  }
}

TEST_CASE("rows are aligned by round and truncated") {
  const auto u = series(Phase::posttrain, 0, {0.2, 0.94});
  const auto r = series(Phase::retrain, 1, {0.4, 0.6, 0.95});
  const auto cmp = compare_recovery(u, r, 2);
  REQUIRE(cmp.rows.size() == 3);
  CHECK(cmp.rows[0].round == 0);
  CHECK_FALSE(cmp.rows[0].retrain_clean.has_value());
  CHECK(*cmp.rows[1].clean_gap == doctest::Approx(0.54));
  CHECK(cmp.rows[2].round == 2);
  CHECK_FALSE(cmp.rows[2].unlearn_clean.has_value());
  CHECK(cmp.unlearn_rounds_to_target == std::optional<int>(1));
  CHECK(cmp.retrain_rounds_to_target == std::optional<int>(3));
}

TEST_CASE("phase names") {
  for (auto p : {Phase::train, Phase::retrain, Phase::posttrain}) CHECK(parse_phase(to_string(p)) == p);
  CHECK_THROWS_AS(parse_phase("warmup"), std::invalid_argument);
}
