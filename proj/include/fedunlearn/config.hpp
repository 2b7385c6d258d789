#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fedunlearn/data.hpp"
#include "fedunlearn/federation.hpp"
#include "fedunlearn/unlearning.hpp"

namespace fedunlearn {

/// Environment variable naming the directory that holds MNIST IDX files when the config
/// selects `data.source: idx` without explicit paths.
inline constexpr const char* kDataDirEnv = "FEDUNLEARN_DATA_DIR";

enum class Scenario { train, retrain, unlearn, full_compare };
enum class DataSource { synthetic, idx };

std::string_view to_string(Scenario s);
std::string_view to_string(DataSource s);

struct DataConfig {
  DataSource source = DataSource::synthetic;
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  /// Keep only the first N examples of each file (0 = all).
  std::size_t max_train = 0;
  std::size_t max_test = 0;
  std::size_t synthetic_train = 3000;
  std::size_t synthetic_test = 1000;
  SyntheticSpec synthetic;
  double val_fraction = 0.1;
  bool exclude_poisoned_validation = false;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct ExperimentConfig {
  DataConfig data;
  /// Layer list or preset, see parse_layers(); the input shape comes from the data.
  std::string arch = "mlp:200";
  FederationConfig federation;
  TriggerSpec trigger{3, Corner::bottom_right, 1.0f, 9, 0.66};
  UnlearnConfig unlearn;
  Scenario scenario = Scenario::full_compare;
  std::filesystem::path out_dir = "runs/latest";
  std::vector<std::string> formats{"csv", "jsonl"};
  /// Checkpoint directory of an earlier run to unlearn from instead of training.
  std::filesystem::path resume_from;

  /// Master seed; also federation.seed.
  std::uint64_t seed() const { return federation.seed; }
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Config problems carry the offending key and, when known, its line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, int line, const std::string& message);
  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  std::string key_;
  int line_;
};

/// Parses a YAML config of the form
///
///   section:
///     key: value
///
/// Unknown keys, wrong types and out-of-range values raise ConfigError. A run MANIFEST
/// is accepted too (its `config` section is used).
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// Applies one "section.key=value" override. Call finalize_config afterwards.
void apply_override(ExperimentConfig& config, std::string_view assignment);

/// Cross-field checks and environment resolution (data directory). Throws ConfigError.
void finalize_config(ExperimentConfig& config);

/// Every key, fully resolved, doubles at round-trip precision.
std::string serialize_config(const ExperimentConfig& config);

}  // namespace fedunlearn
