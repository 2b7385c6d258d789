#pragma once

#include <cstdint>
#include <vector>

#include "fedunlearn/data.hpp"
#include "fedunlearn/metrics.hpp"
#include "fedunlearn/model.hpp"

namespace fedunlearn {

enum class AggregationMode { equal, proportional };

/// Light post-training after unlearning: each remaining client takes exactly
/// `updates_per_round` mini-batch steps per round.
struct PosttrainConfig {
  int rounds = 1;
  int updates_per_round = 25;
  int batch_size = 128;
  double learning_rate = 0.01;
  double momentum = 0.9;

  void validate() const;
  friend bool operator==(const PosttrainConfig&, const PosttrainConfig&) = default;
};

struct FederationConfig {
  int num_clients = 5;
  int rounds = 20;
  int target_client = 0;
  int local_epochs = 1;
  int batch_size = 128;
  double learning_rate = 0.01;
  double momentum = 0.9;
  AggregationMode aggregation = AggregationMode::equal;
  PosttrainConfig posttrain;
  std::uint64_t seed = 1;
  /// Train clients of a round on separate threads. Results are identical either way.
  bool parallel = false;

  void validate() const;
  friend bool operator==(const FederationConfig&, const FederationConfig&) = default;
};

/// Global model plus the local models that produced it.
struct RoundState {
  int round = 0;
  ModelParams global;
  /// Local models from the last completed round, indexed by position in the client list.
  std::vector<ModelParams> local_models;
  std::vector<std::size_t> counts;
};

struct TrainResult {
  RoundState state;
  std::vector<MetricsRecord> metrics;
};

struct ModelResult {
  ModelParams model;
  std::vector<MetricsRecord> metrics;
};

// Seed tags. Every random draw in a run derives from the master seed through one of
// these, so instrumentation never shifts training randomness.
std::uint64_t init_seed(std::uint64_t master, Phase phase);
std::uint64_t client_seed(std::uint64_t master, Phase phase, int round, int client_id);

/// E passes over the client's train split in seeded-shuffled mini-batches of size B
/// (last partial batch included). Velocity starts at zero.
ModelParams local_train(const ClientDataset& client, const ModelParams& start, int epochs, int batch_size,
                        double learning_rate, double momentum, std::uint64_t seed, std::int64_t* updates = nullptr);

/// Exactly `steps` mini-batch descent steps, cycling through fresh seeded shuffles of
/// the train split as needed.
ModelParams local_steps(const ClientDataset& client, const ModelParams& start, int steps, int batch_size,
                        double learning_rate, double momentum, std::uint64_t seed);

/// p_i = n_i / sum(n) (proportional) or 1/N (equal).
std::vector<double> aggregation_weights(const std::vector<std::size_t>& counts, AggregationMode mode);

/// Coordinate-wise weighted mean, accumulated in double as sum(c_i w_i) / sum(c_i).
ModelParams fedavg(const std::vector<ModelParams>& models, const std::vector<std::size_t>& counts,
                   AggregationMode mode);

/// T rounds of broadcast, local training on every client and FedAvg, starting from
/// init_model(arch, init_seed(seed, train)). One metrics record per round when the
/// evaluator is enabled.
TrainResult train_federation(const FederationConfig& config, const std::vector<ClientDataset>& clients,
                             const ArchSpec& arch, const Evaluator& evaluator = {});

/// Same round structure from a fresh initialization over the remaining clients.
ModelResult retrain_baseline(const FederationConfig& config, const std::vector<ClientDataset>& remaining,
                             const ArchSpec& arch, const Evaluator& evaluator = {});

/// Post-training from `start`. Emits a round-0 record for `start` itself, then one per
/// round.
ModelResult posttrain(const ModelParams& start, const std::vector<ClientDataset>& remaining,
                      const PosttrainConfig& config, AggregationMode mode, std::uint64_t seed, bool parallel = false,
                      const Evaluator& evaluator = {});

}  // namespace fedunlearn
