#include <cmath>
#include <stdexcept>
#include <fstream>

#include "../support/fixtures.hpp"
#include "doctest.h"
#include "fedunlearn/checkpoint.hpp"
#include "fedunlearn/experiment.hpp"
#include "fedunlearn/report.hpp"
#include "yaml-cpp/yaml.h"

using namespace fedunlearn;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ExperimentConfig tiny_config(const std::filesystem::path& out, Scenario scenario) {
  auto c = parse_config_text(
      "data:\n  synthetic_train: 400\n  synthetic_test: 200\n"
      "model:\n  arch: \"mlp:16\"\n"
      "federation:\n  clients: 3\n  rounds: 2\n  batch_size: 32\n  learning_rate: 0.05\n"
      "unlearn:\n  batch_size: 64\n  epochs: 1\n"
      "posttrain:\n  rounds: 2\n  updates: 3\n  batch_size: 32\n");
  c.scenario = scenario;
  c.out_dir = out;
  finalize_config(c);
  return c;
}

}  // namespace

TEST_CASE("train scenario writes one record per round and the model files") {
  fixtures::TempDir tmp("exp-train");
  const auto result = run_scenario(tiny_config(tmp.path(), Scenario::train));
  REQUIRE(result.exit_code == 0);
  REQUIRE(result.metrics.size() == 2);
  CHECK(result.metrics[0].round == 1);
  CHECK(result.metrics[1].round == 2);
  for (const char* f : {"config.yaml", "initial.ckpt", "global.ckpt", "local_00.ckpt", "local_02.ckpt", "metrics.csv",
                        "metrics.jsonl", "report.json", "MANIFEST"}) {
    CHECK_MESSAGE(std::filesystem::exists(tmp.path() / f), f);
  }
  const auto csv = metrics_from_csv(read_file(tmp.path() / "metrics.csv"));
  CHECK(csv == result.metrics);
  const auto manifest = YAML::LoadFile((tmp.path() / "MANIFEST").string());
  CHECK(manifest["status"].as<std::string>() == "ok");
}

TEST_CASE("full comparison is reproducible apart from wall-clock time") {
  fixtures::TempDir a("exp-a"), b("exp-b");
  const auto ra = run_scenario(tiny_config(a.path(), Scenario::full_compare));
  const auto rb = run_scenario(tiny_config(b.path(), Scenario::full_compare));
  REQUIRE(ra.exit_code == 0);
  REQUIRE(rb.exit_code == 0);
  CHECK(strip_wall_clock(read_file(a.path() / "metrics.csv")) == strip_wall_clock(read_file(b.path() / "metrics.csv")));
  CHECK(read_file(a.path() / "unlearned_global.ckpt") == read_file(b.path() / "unlearned_global.ckpt"));
  CHECK(read_file(a.path() / "retrain.ckpt") == read_file(b.path() / "retrain.ckpt"));
  REQUIRE(ra.recovery.has_value());
  REQUIRE(ra.outcome.has_value());
  CHECK(ra.outcome->distance <= ra.outcome->delta);
  std::size_t post = 0, retrain = 0;
  for (const auto& r : ra.metrics) {
    post += r.phase == Phase::posttrain ? 1 : 0;
    retrain += r.phase == Phase::retrain ? 1 : 0;
  }
  CHECK(post == 3);  // round 0 plus two rounds
  CHECK(retrain == 2);
  CHECK(ra.table.size() == 5);
}

TEST_CASE("unlearn scenario resumes from saved checkpoints") {
  fixtures::TempDir train_dir("exp-resume-a"), unlearn_dir("exp-resume-b"), direct_dir("exp-resume-c");
  REQUIRE(run_scenario(tiny_config(train_dir.path(), Scenario::train)).exit_code == 0);
  auto resumed = tiny_config(unlearn_dir.path(), Scenario::unlearn);
  resumed.resume_from = train_dir.path();
  const auto r1 = run_scenario(resumed);
  const auto r2 = run_scenario(tiny_config(direct_dir.path(), Scenario::unlearn));
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r2.exit_code == 0);
  CHECK(read_file(unlearn_dir.path() / "unlearned_global.ckpt") == read_file(direct_dir.path() / "unlearned_global.ckpt"));
}

TEST_CASE("failures are reported in the manifest") {
  fixtures::TempDir tmp("exp-fail");
  auto c = tiny_config(tmp.path(), Scenario::train);
  c.data.source = DataSource::idx;
  c.data.train_images = tmp.path() / "missing-images";
  c.data.train_labels = tmp.path() / "missing-labels";
  const auto result = run_scenario(c);
  CHECK(result.exit_code == 1);
  CHECK(result.failed_stage == "prepare data");
  const auto manifest = YAML::LoadFile((tmp.path() / "MANIFEST").string());
  CHECK(manifest["status"].as<std::string>() == "failed");
}

TEST_CASE("strip_wall_clock drops the last column") {
  CHECK(strip_wall_clock("a,b,c\n1,2,3\n") == "a,b\n1,2\n");
}
