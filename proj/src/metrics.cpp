#include "fedunlearn/metrics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "fedunlearn/nn.hpp"

namespace fedunlearn {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::train:
      return "train";
    case Phase::retrain:
      return "retrain";
    case Phase::posttrain:
      return "posttrain";
  }
  return "train";
}

Phase parse_phase(std::string_view text) {
  if (text == "train") return Phase::train;
  if (text == "retrain") return Phase::retrain;
  if (text == "posttrain") return Phase::posttrain;
  throw std::invalid_argument("unknown phase '" + std::string(text) + "'");
}

double clean_accuracy(const ModelParams& model, const Dataset& clean_test) {
  return evaluate_accuracy(model, clean_test);
}

double backdoor_accuracy(const ModelParams& model, const Dataset& triggered_test, int target_label) {
  if (triggered_test.empty()) throw std::invalid_argument("backdoor_accuracy: empty triggered set");
  const auto pred = predict(model, triggered_test);
  std::size_t hits = 0;
  for (int p : pred) hits += p == target_label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

std::pair<double, double> Evaluator::operator()(const ModelParams& model) const {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  return {clean_test ? clean_accuracy(model, *clean_test) : nan,
          backdoor_test ? backdoor_accuracy(model, *backdoor_test, target_label) : nan};
}

RecoveryComparison compare_recovery(const std::vector<MetricsRecord>& unlearn, const std::vector<MetricsRecord>& retrain,
                                    int max_rounds, double margin) {
  RecoveryComparison out;
  std::map<int, RecoveryRow> rows;
  for (const auto& r : unlearn) {
    if (r.round > max_rounds) continue;
    auto& row = rows[r.round];
    row.round = r.round;
    row.unlearn_clean = r.clean_acc;
    row.unlearn_backdoor = r.backdoor_acc;
  }
  for (const auto& r : retrain) {
    if (r.round > max_rounds) continue;
    auto& row = rows[r.round];
    row.round = r.round;
    row.retrain_clean = r.clean_acc;
    row.retrain_backdoor = r.backdoor_acc;
  }
  for (auto& [round, row] : rows) {
    if (row.unlearn_clean && row.retrain_clean) row.clean_gap = *row.unlearn_clean - *row.retrain_clean;
    out.rows.push_back(row);
  }
  if (retrain.empty()) return out;

  out.target_clean = retrain.back().clean_acc - margin;
  for (const auto& r : unlearn) {
    if (r.clean_acc >= out.target_clean) {
      out.unlearn_rounds_to_target = r.round;
      break;
    }
  }
  for (const auto& r : retrain) {
    if (r.clean_acc >= out.target_clean) {
      out.retrain_rounds_to_target = r.round;
      break;
    }
  }
  return out;
}

}  // namespace fedunlearn
