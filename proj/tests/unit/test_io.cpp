#include <cmath>
#include <stdexcept>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include "../support/fixtures.hpp"
#include "doctest.h"
#include "fedunlearn/checkpoint.hpp"
#include "fedunlearn/config.hpp"
#include "fedunlearn/report.hpp"

using namespace fedunlearn;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ConfigError config_error(const std::string& text) {
  try {
    auto c = parse_config_text(text);
    finalize_config(c);
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("expected ConfigError for: " << text);
  return ConfigError("", 0, "");
}

}  // namespace

TEST_CASE("config defaults") {
  auto c = parse_config_text("{}");
  CHECK(c.federation.num_clients == 5);
  CHECK(c.federation.rounds == 20);
  CHECK(c.federation.batch_size == 128);
  CHECK(c.federation.learning_rate == 0.01);
  CHECK(c.federation.momentum == 0.9);
  CHECK(c.federation.local_epochs == 1);
  CHECK(c.unlearn.tau == 0.12);
  CHECK(c.unlearn.clip_radius == 5.0);
  CHECK(c.unlearn.epochs == 5);
  CHECK(c.unlearn.batch_size == 1024);
  CHECK(c.unlearn.delta_mode == DeltaMode::auto_third);
  CHECK(c.federation.posttrain.updates_per_round == 25);
  CHECK(c.federation.posttrain.rounds == 1);
  CHECK(c.trigger.target_label == 9);
  CHECK(c.trigger.poison_fraction == 0.66);
  CHECK_NOTHROW(finalize_config(c));
}

TEST_CASE("config values and errors") {
  const auto c = parse_config_text(
      "federation:\n  clients: 10\n  rounds: 3\n  aggregation: proportional\n"
      "unlearn:\n  delta: 2.5\n  tau: 0.2\n"
      "trigger:\n  anchor: top-left\n"
      "experiment:\n  seed: 17\n  formats: [jsonl]\n");
  CHECK(c.federation.num_clients == 10);
  CHECK(c.federation.aggregation == AggregationMode::proportional);
  CHECK(c.unlearn.delta_mode == DeltaMode::explicit_value);
  CHECK(c.unlearn.delta == 2.5);
  CHECK(c.trigger.anchor == Corner::top_left);
  CHECK(c.seed() == 17);
  CHECK(c.formats == std::vector<std::string>{"jsonl"});

  const auto tau = config_error("unlearn:\n  tau: 1.5\n");
  CHECK(tau.key() == "unlearn.tau");
  CHECK(tau.line() == 2);
  CHECK(config_error("federation:\n  rounds: many\n").key() == "federation.rounds");
  CHECK(config_error("federation:\n  bogus: 1\n").key() == "federation.bogus");
  CHECK(config_error("federation:\n  clients: 3\n  target: 3\n").key() == "federation.target");
  CHECK(config_error("model:\n  arch: \"dense:banana\"\n").key() == "model.arch");
}

TEST_CASE("config round-trips through its serialized form") {
  auto c = parse_config_text("federation:\n  clients: 4\n  learning_rate: 0.0123\nunlearn:\n  delta: 0.7\n");
  finalize_config(c);
  auto again = parse_config_text(serialize_config(c));
  finalize_config(again);
  CHECK(again == c);
}

TEST_CASE("overrides") {
  auto c = parse_config_text("{}");
  apply_override(c, "federation.rounds=7");
  apply_override(c, "unlearn.delta=auto");
  CHECK(c.federation.rounds == 7);
  CHECK_THROWS_AS(apply_override(c, "rounds"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "unlearn.tau=-1"), ConfigError);
}

TEST_CASE("idx paths come from the data directory variable") {
  auto c = parse_config_text("data:\n  source: idx\n");
  const char* prev = std::getenv(kDataDirEnv);
  const std::string saved = prev ? prev : "";
  ::unsetenv(kDataDirEnv);
  CHECK_THROWS_AS(finalize_config(c), ConfigError);
  ::setenv(kDataDirEnv, "/data/mnist", 1);
  finalize_config(c);
  CHECK(c.data.train_images == std::filesystem::path("/data/mnist/train-images-idx3-ubyte"));
  CHECK(c.data.test_labels == std::filesystem::path("/data/mnist/t10k-labels-idx1-ubyte"));
  if (prev) {
    ::setenv(kDataDirEnv, saved.c_str(), 1);
  } else {
    ::unsetenv(kDataDirEnv);
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  fixtures::TempDir tmp("ckpt");
  auto m = init_model(paper_cnn(), 3);
  m.weights[5] = -0.0f;
  m.weights[6] = std::numeric_limits<float>::denorm_min();
  save_checkpoint(m, tmp.path() / "m.ckpt");
  const auto back = load_checkpoint(tmp.path() / "m.ckpt");
  CHECK(back.arch == m.arch);
  REQUIRE(back.weights.size() == m.weights.size());
  CHECK(std::memcmp(back.weights.data(), m.weights.data(), m.weights.size() * sizeof(float)) == 0);
}

TEST_CASE("checkpoint corruption is detected") {
  const auto bytes = encode_checkpoint(init_model(mlp(Shape{2, 2, 1}, {3}, 2), 1));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad_magic), CheckpointError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), CheckpointError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), CheckpointError);
  auto bad_version = bytes;
  bad_version[8] = 2;
  CHECK_THROWS_AS(decode_checkpoint(bad_version), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.ckpt"), CheckpointError);
}

TEST_CASE("metrics CSV") {
  const std::vector<MetricsRecord> one{{Phase::train, 1, 0.5, 0.25, 10, 1.5}};
  const auto text = metrics_to_csv(one);
  CHECK(text == "phase,round,clean_acc,backdoor_acc,updates,seconds\ntrain,1,0.5,0.25,10,1.5\n");

  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<MetricsRecord> many;
  for (int i = 0; i < 40; ++i) {
    many.push_back({static_cast<Phase>(i % 3), i, u(gen), u(gen), static_cast<std::int64_t>(gen() % 100000), u(gen) * 100});
  }
  CHECK(metrics_from_csv(metrics_to_csv(many)) == many);
  CHECK(metrics_from_jsonl(metrics_to_jsonl(many)) == many);

  const std::vector<MetricsRecord> missing{{Phase::posttrain, 0, 0.5, std::nan(""), 0, 0.0}};
  const auto back = metrics_from_jsonl(metrics_to_jsonl(missing));
  CHECK(std::isnan(back[0].backdoor_acc));
  CHECK(std::isnan(metrics_from_csv(metrics_to_csv(missing))[0].backdoor_acc));
  CHECK_THROWS_AS(metrics_from_csv("round,phase\n"), std::invalid_argument);
}

TEST_CASE("metrics export") {
  fixtures::TempDir tmp("metrics");
  const std::vector<MetricsRecord> recs{{Phase::retrain, 2, 0.9, 0.1, 5, 0.0}};
  export_metrics(recs, MetricsFormat::csv, tmp.path() / "m.csv");
  export_metrics(recs, MetricsFormat::jsonl, tmp.path() / "m.jsonl");
  CHECK(metrics_from_csv(read_file(tmp.path() / "m.csv")) == recs);
  CHECK(metrics_from_jsonl(read_file(tmp.path() / "m.jsonl")) == recs);
  CHECK_THROWS_AS(export_metrics({}, MetricsFormat::csv, tmp.path() / "e.csv"), std::invalid_argument);
}
