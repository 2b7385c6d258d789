#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedunlearn/data.hpp"
#include "fedunlearn/federation.hpp"
#include "fedunlearn/metrics.hpp"
#include "fedunlearn/model.hpp"

namespace fedunlearn {

enum class DeltaMode { auto_third, explicit_value };

struct UnlearnConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 1024;
  int epochs = 5;
  /// Early stop as soon as validation accuracy falls below this (absolute accuracy).
  double tau = 0.12;
  double clip_radius = 5.0;
  DeltaMode delta_mode = DeltaMode::auto_third;
  double delta = 0.0;
  int random_models = 10;
  /// Validate on unpoisoned validation examples only.
  bool clean_validation = false;
  std::uint64_t seed = 1;

  void validate() const;
  friend bool operator==(const UnlearnConfig&, const UnlearnConfig&) = default;
};

enum class StopReason { early_stop, epochs_exhausted };
std::string_view to_string(StopReason reason);

struct UnlearnOutcome {
  ModelParams model;
  StopReason stop_reason = StopReason::epochs_exhausted;
  int steps = 0;
  double final_val_acc = 0.0;
  /// |model - reference|.
  double distance = 0.0;
  double delta = 0.0;
};

/// Leave-one-out reference (N * global - last_local) / (N - 1), computed in double.
ModelParams compute_reference(const ModelParams& global, const ModelParams& last_local, int num_clients);

/// One third of the mean distance from `reference` to `count` fresh initializations.
double compute_delta(const ModelParams& reference, int count, std::uint64_t seed);
/// Same rule over explicitly supplied random models.
double compute_delta(const ModelParams& reference, std::span<const ModelParams> random_models);

/// Projected gradient ascent on the client's train split inside the delta ball around
/// `reference`. Each step: batch gradient -> clip -> momentum ascent -> project, then the
/// validation accuracy is checked against tau.
UnlearnOutcome unlearn_pga(const ClientDataset& target, const ModelParams& start, const ModelParams& reference,
                           const UnlearnConfig& config);

struct EraseResult {
  ModelParams reference;
  UnlearnOutcome outcome;
  ModelParams global;
  /// Post-training series; round 0 is the unlearned local model.
  std::vector<MetricsRecord> metrics;
};

/// Reference -> delta -> PGA -> post-training over the clients other than `target_id`.
/// `clients` must be the list `state` was trained on.
EraseResult erase_client(const RoundState& state, const std::vector<ClientDataset>& clients, int target_id,
                         const UnlearnConfig& unlearn, const PosttrainConfig& post, AggregationMode mode,
                         std::uint64_t seed, bool parallel = false, const Evaluator& evaluator = {});

}  // namespace fedunlearn
