#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedunlearn/config.hpp"
#include "fedunlearn/report.hpp"

namespace fedunlearn {

/// Client shards (target poisoned, every client split) and server-side test sets.
struct PreparedData {
  ArchSpec arch;
  std::vector<ClientDataset> clients;
  Dataset clean_test;
  Dataset backdoor_test;
  int target_label = 9;

  Evaluator evaluator() const { return Evaluator{&clean_test, &backdoor_test, target_label}; }
};

/// Loads or generates data and applies partition -> backdoor injection on the target
/// client -> per-client train/validation split, all seeded from the master seed.
PreparedData prepare_data(const ExperimentConfig& config);

struct ArtifactEntry {
  std::string file;
  std::string role;
};

struct ScenarioResult {
  int exit_code = 0;
  std::string failed_stage;
  std::string error;
  std::vector<MetricsRecord> metrics;
  /// Table columns in order: FedAvg, Retrain, Reference, UN-Local, UN-Global (only the
  /// ones the scenario produced).
  std::vector<AccuracyPair> table;
  std::optional<UnlearnOutcome> outcome;
  /// Mean loss on the target's train split at the PGA start and end points.
  std::optional<std::pair<double, double>> target_loss;
  std::optional<RecoveryComparison> recovery;
  std::vector<ArtifactEntry> artifacts;
};

/// Runs the configured scenario and writes its artifacts into config.out_dir. Never
/// throws for pipeline failures: they yield a nonzero exit code and a MANIFEST marking
/// the failed stage.
ScenarioResult run_scenario(const ExperimentConfig& config);

/// Metrics CSV with the wall-clock column blanked, for determinism comparisons.
std::string strip_wall_clock(const std::string& metrics_csv);

}  // namespace fedunlearn
