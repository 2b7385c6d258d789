#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedunlearn/dataset.hpp"
#include "fedunlearn/model.hpp"

namespace fedunlearn {

enum class Phase { train, retrain, posttrain };

std::string_view to_string(Phase phase);
Phase parse_phase(std::string_view text);

struct MetricsRecord {
  Phase phase = Phase::train;
  int round = 0;
  double clean_acc = 0.0;
  double backdoor_acc = 0.0;
  /// Cumulative client updates (mini-batch steps summed over clients) in this phase.
  std::int64_t updates = 0;
  double seconds = 0.0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

/// Fraction of clean test examples classified correctly.
double clean_accuracy(const ModelParams& model, const Dataset& clean_test);

/// Fraction of triggered examples predicted as `target_label`.
double backdoor_accuracy(const ModelParams& model, const Dataset& triggered_test, int target_label);

/// Server-side test sets used to instrument rounds. Either pointer may be null, in which
/// case the matching accuracy is reported as NaN.
struct Evaluator {
  const Dataset* clean_test = nullptr;
  const Dataset* backdoor_test = nullptr;
  int target_label = 9;

  bool enabled() const { return clean_test != nullptr || backdoor_test != nullptr; }
  /// Returns (clean, backdoor).
  std::pair<double, double> operator()(const ModelParams& model) const;
};

struct RecoveryRow {
  int round = 0;
  std::optional<double> unlearn_clean;
  std::optional<double> unlearn_backdoor;
  std::optional<double> retrain_clean;
  std::optional<double> retrain_backdoor;
  /// unlearn_clean - retrain_clean when both exist.
  std::optional<double> clean_gap;
};

/// Per-round alignment of the unlearn + post-training series against the retrain
/// series, plus how many rounds each needs to get within `margin` of the retrain
/// series' final clean accuracy.
struct RecoveryComparison {
  std::vector<RecoveryRow> rows;
  double target_clean = 0.0;
  std::optional<int> unlearn_rounds_to_target;
  std::optional<int> retrain_rounds_to_target;
};

/// `margin` is in accuracy units (0.02 = two points). Rows cover rounds 0..max_rounds
/// present in either series.
RecoveryComparison compare_recovery(const std::vector<MetricsRecord>& unlearn, const std::vector<MetricsRecord>& retrain,
                                    int max_rounds, double margin = 0.02);

}  // namespace fedunlearn
