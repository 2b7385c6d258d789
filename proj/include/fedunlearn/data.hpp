#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fedunlearn/dataset.hpp"

namespace fedunlearn {

// ---------------------------------------------------------------------------
// IDX files
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

class IdxError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, truncated, count_mismatch };
  IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Reads an IDX image file (ubyte, 3 dims) and its label file. Pixels are scaled by 1/255.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 Origin origin = Origin::train);

/// Writes a dataset back to IDX (pixels rounded to the nearest byte). Single-channel only.
void save_idx(const Dataset& data, const std::filesystem::path& images, const std::filesystem::path& labels);

// ---------------------------------------------------------------------------
// Clients, triggers, splits
// ---------------------------------------------------------------------------

/// One client's local data. Before split_train_val everything lives in `train`.
struct ClientDataset {
  int client_id = 0;
  Dataset train;
  Dataset validation;

  std::size_t count() const { return train.size() + validation.size(); }
  std::size_t poisoned_count() const { return train.poisoned_count() + validation.poisoned_count(); }
};

enum class Corner { top_left, top_right, bottom_left, bottom_right };

/// Square pixel-pattern trigger stamped at an image corner.
struct TriggerSpec {
  int size = 3;
  Corner anchor = Corner::bottom_right;
  float pixel_value = 1.0f;
  int target_label = 9;
  double poison_fraction = 0.0;

  /// (row, col) pixel positions covered by the pattern.
  std::vector<std::pair<int, int>> offsets(const Shape& shape) const;
  void validate(const Shape& shape, int num_classes) const;
  void stamp(std::span<float> image, const Shape& shape) const;
  friend bool operator==(const TriggerSpec&, const TriggerSpec&) = default;
};

/// Seeded shuffle into `n_clients` equal shards of floor(n / n_clients); the remainder is
/// dropped.
std::vector<ClientDataset> partition(const Dataset& data, int n_clients, std::uint64_t seed);

/// Poisons floor(f * eligible) examples whose label differs from the target: the pattern
/// is stamped, the label overwritten and the poisoned flag set.
ClientDataset inject_backdoor(const ClientDataset& client, const TriggerSpec& trigger, std::uint64_t seed);

/// Seeded shuffle of all the client's examples, then a validation split of
/// round(n * val_fraction). With `exclude_poisoned_validation`, poisoned examples are
/// kept in the train split.
ClientDataset split_train_val(const ClientDataset& client, double val_fraction, std::uint64_t seed,
                              bool exclude_poisoned_validation = false);

/// Stamps the trigger on every example whose label differs from the target; original
/// labels are kept. Throws if nothing is left.
Dataset make_backdoor_testset(const Dataset& test, const TriggerSpec& trigger);

/// Copy of `clients` without the given client id.
std::vector<ClientDataset> without_client(const std::vector<ClientDataset>& clients, int client_id);

// ---------------------------------------------------------------------------
// Synthetic digits
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  int height = 8;
  int width = 8;
  int num_classes = 10;
  double noise = 0.15;
  /// Seeds the class prototypes; train and test sets must share it.
  std::uint64_t prototype_seed = 1234;
  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

/// Gaussian-blob digits: every class has a fixed prototype made of a few blobs
/// (peak 0.8, away from the image corners), examples add pixel noise and are clamped
/// to [0,1]. Labels cycle through the classes.
Dataset make_synthetic(std::size_t count, std::uint64_t seed, const SyntheticSpec& spec = {},
                       Origin origin = Origin::train);

}  // namespace fedunlearn
