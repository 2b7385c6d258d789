#include "fedunlearn/unlearning.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>
#include <string>

#include "fedunlearn/nn.hpp"
#include "fedunlearn/optim.hpp"
#include "fedunlearn/rng.hpp"
#include "fedunlearn/vector_ops.hpp"

namespace fedunlearn {

void UnlearnConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("unlearn.learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("unlearn.momentum must be in [0, 1)");
  if (batch_size < 1) throw std::invalid_argument("unlearn.batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("unlearn.epochs must be >= 1");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("unlearn.tau must be in [0, 1]");
  if (!(clip_radius > 0.0)) throw std::invalid_argument("unlearn.clip_radius must be positive");
  if (delta_mode == DeltaMode::explicit_value && !(delta > 0.0)) {
    throw std::invalid_argument("unlearn.delta must be positive");
  }
  if (random_models < 1) throw std::invalid_argument("unlearn.random_models must be >= 1");
}

std::string_view to_string(StopReason reason) {
  return reason == StopReason::early_stop ? "early-stop" : "epochs-exhausted";
}

ModelParams compute_reference(const ModelParams& global, const ModelParams& last_local, int num_clients) {
  if (num_clients < 2) throw std::invalid_argument("compute_reference: need at least 2 clients");
  if (global.dim() != last_local.dim()) throw std::invalid_argument("compute_reference: dimension mismatch");
  const double n = num_clients;
  ModelParams ref{global.arch, std::vector<float>(global.dim())};
  for (std::size_t i = 0; i < global.dim(); ++i) {
    ref.weights[i] = static_cast<float>((n * static_cast<double>(global.weights[i]) -
                                         static_cast<double>(last_local.weights[i])) / (n - 1.0));
  }
  return ref;
}

double compute_delta(const ModelParams& reference, std::span<const ModelParams> random_models) {
  if (random_models.empty()) throw std::invalid_argument("compute_delta: need at least one random model");
  double sum = 0.0;
  for (const auto& m : random_models) {
    sum += l2_distance(std::span<const float>(reference.weights), std::span<const float>(m.weights));
  }
  const double delta = sum / static_cast<double>(random_models.size()) / 3.0;
  if (!(delta > 0.0)) throw std::invalid_argument("compute_delta: degenerate radius 0");
  return delta;
}

double compute_delta(const ModelParams& reference, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("compute_delta: count must be >= 1");
  std::vector<ModelParams> randoms;
  randoms.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    randoms.push_back(init_model(reference.arch, derive_seed(seed, {tag_hash("delta"), static_cast<std::uint64_t>(k)})));
  }
  return compute_delta(reference, randoms);
}

UnlearnOutcome unlearn_pga(const ClientDataset& target, const ModelParams& start, const ModelParams& reference,
                           const UnlearnConfig& config) {
  config.validate();
  if (target.train.empty()) throw std::invalid_argument("unlearn_pga: empty train split");
  if (target.validation.empty()) throw std::invalid_argument("unlearn_pga: empty validation split");
  if (start.dim() != reference.dim()) throw std::invalid_argument("unlearn_pga: dimension mismatch");
  if (!std::isfinite(l2_distance(std::span<const float>(start.weights), std::span<const float>(reference.weights)))) {
    throw std::invalid_argument("unlearn_pga: non-finite distance between start and reference");
  }

  Dataset validation = target.validation;
  if (config.clean_validation) {
    std::vector<std::size_t> clean;
    for (std::size_t i = 0; i < validation.size(); ++i) {
      if (!validation.poisoned[i]) clean.push_back(i);
    }
    if (clean.empty()) throw std::invalid_argument("unlearn_pga: no clean validation examples");
    validation = validation.subset(clean);
  }

  UnlearnOutcome out;
  out.delta = config.delta_mode == DeltaMode::auto_third
                  ? compute_delta(reference, config.random_models, derive_seed(config.seed, {tag_hash("delta")}))
                  : config.delta;
  out.model = start;
  auto opt = OptimizerState::fresh(start.dim(), config.momentum, config.learning_rate);
  Rng rng(derive_seed(config.seed, {tag_hash("pga")}));
  const std::size_t n = target.train.size();
  const auto b = static_cast<std::size_t>(config.batch_size);
  const std::span<const float> center(reference.weights);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = rng.permutation(n);
    for (std::size_t first = 0; first < n; first += b) {
      const std::size_t count = std::min(b, n - first);
      LossAndGrad lg;
      try {
        lg = loss_and_grad(out.model, target.train.batch(std::span<const std::size_t>(order.data() + first, count)));
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("unlearn_pga: step " + std::to_string(out.steps + 1) + ": " + e.what());
      }
      const auto clipped = clip_grad(std::span<const double>(lg.grad), config.clip_radius);
      sgd_step(out.model, clipped, opt, Direction::ascent);
      out.model.weights = project_l2(std::span<const float>(out.model.weights), center, out.delta);
      ++out.steps;
      out.final_val_acc = evaluate_accuracy(out.model, validation);
      if (out.final_val_acc < config.tau) {
        out.stop_reason = StopReason::early_stop;
        out.distance = l2_distance(std::span<const float>(out.model.weights), center);
        return out;
      }
    }
  }
  out.stop_reason = StopReason::epochs_exhausted;
  out.distance = l2_distance(std::span<const float>(out.model.weights), center);
  return out;
}

EraseResult erase_client(const RoundState& state, const std::vector<ClientDataset>& clients, int target_id,
                         const UnlearnConfig& unlearn, const PosttrainConfig& post, AggregationMode mode,
                         std::uint64_t seed, bool parallel, const Evaluator& evaluator) {
  std::size_t pos = clients.size();
  for (std::size_t k = 0; k < clients.size(); ++k) {
    if (clients[k].client_id == target_id) pos = k;
  }
  if (pos == clients.size()) throw std::invalid_argument("erase_client: unknown target client " + std::to_string(target_id));
  const int n = static_cast<int>(clients.size());

  ModelParams last_local = state.global;
  if (state.local_models.size() == clients.size()) {
    last_local = state.local_models[pos];
  } else {
    std::clog << "erase_client: target's last local model unavailable, starting from the global model\n";
  }

  EraseResult result;
  result.reference = compute_reference(state.global, last_local, n);
  result.outcome = unlearn_pga(clients[pos], last_local, result.reference, unlearn);
  auto post_result = posttrain(result.outcome.model, without_client(clients, target_id), post, mode, seed, parallel,
                               evaluator);
  result.global = std::move(post_result.model);
  result.metrics = std::move(post_result.metrics);
  return result;
}

}  // namespace fedunlearn
