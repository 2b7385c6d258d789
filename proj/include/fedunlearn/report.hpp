#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fedunlearn/metrics.hpp"

namespace fedunlearn {

enum class MetricsFormat { csv, jsonl };

inline constexpr const char* kMetricsCsvHeader = "phase,round,clean_acc,backdoor_acc,updates,seconds";

/// Shortest text that parses back to the same double ("nan" for NaN).
std::string format_number(double value);

std::string metrics_to_csv(const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> metrics_from_csv(const std::string& text);
std::string metrics_to_jsonl(const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> metrics_from_jsonl(const std::string& text);

/// Writes `records` to `path`. Throws std::invalid_argument on an empty list and
/// std::runtime_error if the file cannot be written.
void export_metrics(const std::vector<MetricsRecord>& records, MetricsFormat format, const std::filesystem::path& path);

/// Two-series, plot-ready table: round,unlearn_clean,unlearn_backdoor,retrain_clean,
/// retrain_backdoor,clean_gap (empty cells where a series has no point).
std::string recovery_to_csv(const RecoveryComparison& comparison);

/// One (clean, backdoor) accuracy pair per model role.
struct AccuracyPair {
  std::string role;
  double clean = 0.0;
  double backdoor = 0.0;
};

/// Percentages with two decimals, one column pair per role.
std::string format_accuracy_table(const std::vector<AccuracyPair>& row, int num_clients);

}  // namespace fedunlearn
