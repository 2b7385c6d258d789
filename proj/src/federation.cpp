#include "fedunlearn/federation.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>

#include "fedunlearn/nn.hpp"
#include "fedunlearn/optim.hpp"
#include "fedunlearn/rng.hpp"

namespace fedunlearn {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void step_on(const Dataset& data, std::span<const std::size_t> idx, ModelParams& model, OptimizerState& opt) {
  const auto lg = loss_and_grad(model, data.batch(idx));
  sgd_step(model, lg.grad, opt, Direction::descent);
}

/// Runs `task(k)` for every client, optionally one thread per client.
void for_each_client(std::size_t n, bool parallel, const std::function<void(std::size_t)>& task) {
  if (!parallel || n < 2) {
    for (std::size_t k = 0; k < n; ++k) task(k);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> workers;
    workers.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      workers.emplace_back([&, k] {
        try {
          task(k);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

MetricsRecord record(Phase phase, int round, const ModelParams& model, const Evaluator& eval, std::int64_t updates,
                     Clock::time_point start) {
  auto [clean, backdoor] = eval(model);
  return MetricsRecord{phase, round, clean, backdoor, updates, seconds_since(start)};
}

TrainResult run_rounds(const FederationConfig& config, const std::vector<ClientDataset>& clients, ModelParams global,
                       Phase phase, const Evaluator& evaluator) {
  if (clients.empty()) throw std::invalid_argument("federation: no clients");
  const auto start = Clock::now();
  TrainResult result;
  result.state.global = std::move(global);
  for (const auto& c : clients) result.state.counts.push_back(c.train.size());
  std::int64_t updates = 0;
  for (int t = 0; t < config.rounds; ++t) {
    std::vector<ModelParams> locals(clients.size());
    std::vector<std::int64_t> steps(clients.size(), 0);
    for_each_client(clients.size(), config.parallel, [&](std::size_t k) {
      locals[k] = local_train(clients[k], result.state.global, config.local_epochs, config.batch_size,
                              config.learning_rate, config.momentum,
                              client_seed(config.seed, phase, t, clients[k].client_id), &steps[k]);
    });
    for (auto s : steps) updates += s;
    result.state.global = fedavg(locals, result.state.counts, config.aggregation);
    result.state.local_models = std::move(locals);
    result.state.round = t + 1;
    if (evaluator.enabled()) result.metrics.push_back(record(phase, t + 1, result.state.global, evaluator, updates, start));
  }
  return result;
}

}  // namespace

void PosttrainConfig::validate() const {
  if (rounds < 0) throw std::invalid_argument("posttrain.rounds must be >= 0");
  if (updates_per_round < 1) throw std::invalid_argument("posttrain.updates must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("posttrain.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("posttrain.learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("posttrain.momentum must be in [0, 1)");
}

void FederationConfig::validate() const {
  if (num_clients < 2) throw std::invalid_argument("federation.clients must be >= 2");
  if (rounds < 1) throw std::invalid_argument("federation.rounds must be >= 1");
  if (target_client < 0 || target_client >= num_clients) {
    throw std::invalid_argument("federation.target must be in [0, clients)");
  }
  if (local_epochs < 0) throw std::invalid_argument("federation.local_epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("federation.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("federation.learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("federation.momentum must be in [0, 1)");
  posttrain.validate();
}

std::uint64_t init_seed(std::uint64_t master, Phase phase) {
  return derive_seed(master, {tag_hash("init"), tag_hash(to_string(phase))});
}

std::uint64_t client_seed(std::uint64_t master, Phase phase, int round, int client_id) {
  return derive_seed(master, {tag_hash(to_string(phase)), static_cast<std::uint64_t>(round),
                              static_cast<std::uint64_t>(client_id)});
}

ModelParams local_train(const ClientDataset& client, const ModelParams& start, int epochs, int batch_size,
                        double learning_rate, double momentum, std::uint64_t seed, std::int64_t* updates) {
  if (client.train.empty()) throw std::invalid_argument("local_train: client has an empty train split");
  if (batch_size < 1) throw std::invalid_argument("local_train: batch size must be >= 1");
  ModelParams model = start;
  if (epochs <= 0) return model;
  auto opt = OptimizerState::fresh(model.dim(), momentum, learning_rate);
  Rng rng(seed);
  const std::size_t n = client.train.size();
  const auto b = static_cast<std::size_t>(batch_size);
  for (int e = 0; e < epochs; ++e) {
    const auto order = rng.permutation(n);
    for (std::size_t first = 0; first < n; first += b) {
      const std::size_t count = std::min(b, n - first);
      step_on(client.train, std::span<const std::size_t>(order.data() + first, count), model, opt);
      if (updates) ++*updates;
    }
  }
  return model;
}

ModelParams local_steps(const ClientDataset& client, const ModelParams& start, int steps, int batch_size,
                        double learning_rate, double momentum, std::uint64_t seed) {
  if (client.train.empty()) throw std::invalid_argument("local_steps: client has an empty train split");
  if (batch_size < 1) throw std::invalid_argument("local_steps: batch size must be >= 1");
  ModelParams model = start;
  if (steps <= 0) return model;
  auto opt = OptimizerState::fresh(model.dim(), momentum, learning_rate);
  Rng rng(seed);
  const std::size_t n = client.train.size();
  const auto b = static_cast<std::size_t>(batch_size);
  std::vector<std::size_t> order;
  std::size_t pos = n;
  for (int s = 0; s < steps; ++s) {
    if (pos >= n) {
      order = rng.permutation(n);
      pos = 0;
    }
    const std::size_t count = std::min(b, n - pos);
    step_on(client.train, std::span<const std::size_t>(order.data() + pos, count), model, opt);
    pos += count;
  }
  return model;
}

std::vector<double> aggregation_weights(const std::vector<std::size_t>& counts, AggregationMode mode) {
  if (counts.empty()) throw std::invalid_argument("aggregation_weights: no clients");
  std::vector<double> w(counts.size());
  if (mode == AggregationMode::equal) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(counts.size()));
    return w;
  }
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  if (total <= 0.0) throw std::invalid_argument("aggregation_weights: total example count is zero");
  for (std::size_t i = 0; i < counts.size(); ++i) w[i] = static_cast<double>(counts[i]) / total;
  return w;
}

ModelParams fedavg(const std::vector<ModelParams>& models, const std::vector<std::size_t>& counts,
                   AggregationMode mode) {
  if (models.empty()) throw std::invalid_argument("fedavg: no models");
  if (counts.size() != models.size()) throw std::invalid_argument("fedavg: one count per model required");
  const std::size_t dim = models.front().dim();
  for (const auto& m : models) {
    if (m.dim() != dim) throw std::invalid_argument("fedavg: dimension mismatch");
  }
  std::vector<double> coef(models.size(), 1.0);
  if (mode == AggregationMode::proportional) {
    for (std::size_t i = 0; i < models.size(); ++i) coef[i] = static_cast<double>(counts[i]);
  }
  double total = 0.0;
  for (double c : coef) total += c;
  if (total <= 0.0) throw std::invalid_argument("fedavg: total example count is zero");

  std::vector<double> acc(dim, 0.0);
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& w = models[i].weights;
    for (std::size_t j = 0; j < dim; ++j) acc[j] += coef[i] * static_cast<double>(w[j]);
  }
  ModelParams out{models.front().arch, std::vector<float>(dim)};
  for (std::size_t j = 0; j < dim; ++j) out.weights[j] = static_cast<float>(acc[j] / total);
  return out;
}

TrainResult train_federation(const FederationConfig& config, const std::vector<ClientDataset>& clients,
                             const ArchSpec& arch, const Evaluator& evaluator) {
  config.validate();
  if (clients.size() != static_cast<std::size_t>(config.num_clients)) {
    throw std::invalid_argument("train_federation: expected " + std::to_string(config.num_clients) + " clients, got " +
                                std::to_string(clients.size()));
  }
  return run_rounds(config, clients, init_model(arch, init_seed(config.seed, Phase::train)), Phase::train, evaluator);
}

ModelResult retrain_baseline(const FederationConfig& config, const std::vector<ClientDataset>& remaining,
                             const ArchSpec& arch, const Evaluator& evaluator) {
  config.validate();
  if (remaining.empty()) throw std::invalid_argument("retrain_baseline: no remaining clients");
  auto result =
      run_rounds(config, remaining, init_model(arch, init_seed(config.seed, Phase::retrain)), Phase::retrain, evaluator);
  return ModelResult{std::move(result.state.global), std::move(result.metrics)};
}

ModelResult posttrain(const ModelParams& start, const std::vector<ClientDataset>& remaining,
                      const PosttrainConfig& config, AggregationMode mode, std::uint64_t seed, bool parallel,
                      const Evaluator& evaluator) {
  config.validate();
  if (remaining.empty()) throw std::invalid_argument("posttrain: no remaining clients");
  start.validate();
  const auto t0 = Clock::now();
  ModelResult result{start, {}};
  std::vector<std::size_t> counts;
  for (const auto& c : remaining) counts.push_back(c.train.size());
  if (evaluator.enabled()) result.metrics.push_back(record(Phase::posttrain, 0, start, evaluator, 0, t0));
  std::int64_t updates = 0;
  for (int r = 0; r < config.rounds; ++r) {
    std::vector<ModelParams> locals(remaining.size());
    for_each_client(remaining.size(), parallel, [&](std::size_t k) {
      locals[k] = local_steps(remaining[k], result.model, config.updates_per_round, config.batch_size,
                              config.learning_rate, config.momentum,
                              client_seed(seed, Phase::posttrain, r, remaining[k].client_id));
    });
    updates += static_cast<std::int64_t>(config.updates_per_round) * static_cast<std::int64_t>(remaining.size());
    result.model = fedavg(locals, counts, mode);
    if (evaluator.enabled()) result.metrics.push_back(record(Phase::posttrain, r + 1, result.model, evaluator, updates, t0));
  }
  return result;
}

}  // namespace fedunlearn
