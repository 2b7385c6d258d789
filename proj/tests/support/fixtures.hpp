#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "fedunlearn/dataset.hpp"
#include "fedunlearn/model.hpp"

namespace fixtures {

/// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("fedunlearn-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Model whose output layer always favours `cls`: all weights zero except the final bias.
inline fedunlearn::ModelParams constant_predictor(const fedunlearn::ArchSpec& arch, int cls) {
  auto m = fedunlearn::zero_model(arch);
  const int k = arch.num_classes();
  m.weights[m.weights.size() - static_cast<std::size_t>(k) + static_cast<std::size_t>(cls)] = 1.0f;
  return m;
}

/// Random dataset with pixels in [0,1].
inline fedunlearn::Dataset random_dataset(std::size_t n, fedunlearn::Shape shape, int classes, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<float> px(0.0f, 1.0f);
  fedunlearn::Dataset d;
  d.shape = shape;
  d.num_classes = classes;
  d.features.resize(n * shape.size());
  for (auto& v : d.features) v = px(gen);
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.labels[i] = static_cast<int>(gen() % static_cast<std::uint64_t>(classes));
  d.poisoned.assign(n, 0);
  return d;
}

}  // namespace fixtures
