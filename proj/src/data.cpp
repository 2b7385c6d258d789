#include "fedunlearn/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <numeric>
#include <string>

#include "fedunlearn/rng.hpp"

namespace fedunlearn {
namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::io, "idx: cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset, const std::filesystem::path& path) {
  if (buf.size() < offset + 4) throw IdxError(IdxError::Kind::truncated, "idx: truncated header in " + path.string());
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> bytes{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                                  static_cast<char>(v)};
  out.write(bytes.data(), bytes.size());
}

std::size_t poison_quota(double fraction, std::size_t eligible) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(eligible) + 1e-9));
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, Origin origin) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);
  const std::uint32_t img_magic = read_be32(img, 0, images);
  if (img_magic != kIdxImageMagic) {
    throw IdxError(IdxError::Kind::bad_magic, "idx: bad magic in image file " + images.string());
  }
  const std::uint32_t lab_magic = read_be32(lab, 0, labels);
  if (lab_magic != kIdxLabelMagic) {
    throw IdxError(IdxError::Kind::bad_magic, "idx: bad magic in label file " + labels.string());
  }
  const std::size_t n_img = read_be32(img, 4, images);
  const std::size_t rows = read_be32(img, 8, images);
  const std::size_t cols = read_be32(img, 12, images);
  const std::size_t n_lab = read_be32(lab, 4, labels);
  if (n_img != n_lab) {
    throw IdxError(IdxError::Kind::count_mismatch, "idx: " + std::to_string(n_img) + " images but " +
                                                       std::to_string(n_lab) + " labels");
  }
  const std::size_t pixels = rows * cols;
  if (img.size() < 16 + n_img * pixels) {
    throw IdxError(IdxError::Kind::truncated, "idx: image payload truncated in " + images.string());
  }
  if (lab.size() < 8 + n_lab) {
    throw IdxError(IdxError::Kind::truncated, "idx: label payload truncated in " + labels.string());
  }

  Dataset data;
  data.shape = Shape{static_cast<int>(rows), static_cast<int>(cols), 1};
  data.num_classes = 10;
  data.origin = origin;
  data.features.resize(n_img * pixels);
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    data.features[i] = static_cast<float>(img[16 + i]) / 255.0f;
  }
  data.labels.resize(n_lab);
  for (std::size_t i = 0; i < n_lab; ++i) {
    data.labels[i] = lab[8 + i];
    if (data.labels[i] >= data.num_classes) {
      throw IdxError(IdxError::Kind::count_mismatch, "idx: label " + std::to_string(data.labels[i]) + " at index " +
                                                         std::to_string(i) + " exceeds 9");
    }
  }
  data.poisoned.assign(n_lab, 0);
  return data;
}

void save_idx(const Dataset& data, const std::filesystem::path& images, const std::filesystem::path& labels) {
  if (data.shape.channels != 1) throw std::invalid_argument("save_idx: only single-channel images are supported");
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw IdxError(IdxError::Kind::io, "idx: cannot write " + images.string());
  write_be32(img, kIdxImageMagic);
  write_be32(img, static_cast<std::uint32_t>(data.size()));
  write_be32(img, static_cast<std::uint32_t>(data.shape.height));
  write_be32(img, static_cast<std::uint32_t>(data.shape.width));
  for (float v : data.features) {
    img.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f))));
  }
  write_be32(lab, kIdxLabelMagic);
  write_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (int y : data.labels) lab.put(static_cast<char>(y));
}

std::vector<std::pair<int, int>> TriggerSpec::offsets(const Shape& shape) const {
  const bool bottom = anchor == Corner::bottom_left || anchor == Corner::bottom_right;
  const bool right = anchor == Corner::top_right || anchor == Corner::bottom_right;
  const int row0 = bottom ? shape.height - size : 0;
  const int col0 = right ? shape.width - size : 0;
  std::vector<std::pair<int, int>> out;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) out.emplace_back(row0 + r, col0 + c);
  }
  return out;
}

void TriggerSpec::validate(const Shape& shape, int num_classes) const {
  if (size <= 0 || size > shape.height || size > shape.width) {
    throw std::invalid_argument("trigger: size " + std::to_string(size) + " does not fit the image");
  }
  if (!(pixel_value >= 0.0f && pixel_value <= 1.0f)) throw std::invalid_argument("trigger: pixel value outside [0,1]");
  if (target_label < 0 || target_label >= num_classes) throw std::invalid_argument("trigger: target label out of range");
  if (!(poison_fraction >= 0.0 && poison_fraction <= 1.0)) {
    throw std::invalid_argument("trigger: poison fraction outside [0,1]");
  }
}

void TriggerSpec::stamp(std::span<float> image, const Shape& shape) const {
  for (auto [r, c] : offsets(shape)) {
    for (int ch = 0; ch < shape.channels; ++ch) {
      image[(static_cast<std::size_t>(r) * shape.width + c) * shape.channels + ch] = pixel_value;
    }
  }
}

std::vector<ClientDataset> partition(const Dataset& data, int n_clients, std::uint64_t seed) {
  if (n_clients < 2) throw std::invalid_argument("partition: need at least 2 clients");
  if (data.size() < static_cast<std::size_t>(n_clients)) {
    throw std::invalid_argument("partition: " + std::to_string(data.size()) + " examples cannot fill " +
                                std::to_string(n_clients) + " clients");
  }
  Rng rng(seed);
  const auto order = rng.permutation(data.size());
  const std::size_t shard = data.size() / static_cast<std::size_t>(n_clients);
  const std::size_t dropped = data.size() - shard * static_cast<std::size_t>(n_clients);
  if (dropped > 0) {
    std::clog << "partition: dropping " << dropped << " remainder example(s)\n";
  }
  std::vector<ClientDataset> clients;
  clients.reserve(static_cast<std::size_t>(n_clients));
  for (int c = 0; c < n_clients; ++c) {
    std::span<const std::size_t> idx(order.data() + static_cast<std::size_t>(c) * shard, shard);
    ClientDataset client;
    client.client_id = c;
    client.train = data.subset(idx);
    client.train.origin = Origin::train;
    client.validation = Dataset{data.shape, data.num_classes, {}, {}, {}, Origin::train};
    clients.push_back(std::move(client));
  }
  return clients;
}

ClientDataset inject_backdoor(const ClientDataset& client, const TriggerSpec& trigger, std::uint64_t seed) {
  trigger.validate(client.train.shape, client.train.num_classes);
  ClientDataset out = client;
  // Eligible examples across both splits: (split, index).
  std::vector<std::pair<int, std::size_t>> eligible;
  for (std::size_t i = 0; i < out.train.size(); ++i) {
    if (out.train.labels[i] != trigger.target_label) eligible.emplace_back(0, i);
  }
  for (std::size_t i = 0; i < out.validation.size(); ++i) {
    if (out.validation.labels[i] != trigger.target_label) eligible.emplace_back(1, i);
  }
  const std::size_t quota = poison_quota(trigger.poison_fraction, eligible.size());
  if (quota == 0) return out;
  Rng rng(seed);
  const auto order = rng.permutation(eligible.size());
  for (std::size_t k = 0; k < quota; ++k) {
    auto [split, i] = eligible[order[k]];
    Dataset& ds = split == 0 ? out.train : out.validation;
    trigger.stamp(ds.image(i), ds.shape);
    ds.labels[i] = trigger.target_label;
    ds.poisoned[i] = 1;
  }
  return out;
}

ClientDataset split_train_val(const ClientDataset& client, double val_fraction, std::uint64_t seed,
                              bool exclude_poisoned_validation) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("split_train_val: val_fraction must be in (0, 1)");
  }
  const Dataset all = concat(client.train, client.validation);
  const std::size_t n = all.size();
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_fraction));
  if (n_val < 1 || n_val >= n) {
    throw std::invalid_argument("split_train_val: " + std::to_string(n) + " examples cannot be split with fraction " +
                                std::to_string(val_fraction));
  }
  Rng rng(seed);
  auto order = rng.permutation(n);
  if (exclude_poisoned_validation) {
    // Clean examples first, keeping the shuffled order within each group.
    std::stable_partition(order.begin(), order.end(), [&](std::size_t i) { return all.poisoned[i] == 0; });
    const std::size_t clean = n - all.poisoned_count();
    if (clean < n_val) throw std::invalid_argument("split_train_val: too few clean examples for validation");
  }
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> tr_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  ClientDataset out;
  out.client_id = client.client_id;
  out.train = all.subset(tr_idx);
  out.validation = all.subset(val_idx);
  return out;
}

Dataset make_backdoor_testset(const Dataset& test, const TriggerSpec& trigger) {
  if (test.empty()) throw std::invalid_argument("make_backdoor_testset: empty test set");
  trigger.validate(test.shape, test.num_classes);
  Dataset out{test.shape, test.num_classes, {}, {}, {}, Origin::test};
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test.labels[i] == trigger.target_label) continue;
    out.push_back(test, i);
    trigger.stamp(out.image(out.size() - 1), out.shape);
    out.poisoned.back() = 1;
  }
  if (out.empty()) throw std::invalid_argument("make_backdoor_testset: every example carries the target label");
  return out;
}

std::vector<ClientDataset> without_client(const std::vector<ClientDataset>& clients, int client_id) {
  std::vector<ClientDataset> out;
  for (const auto& c : clients) {
    if (c.client_id != client_id) out.push_back(c);
  }
  return out;
}

Dataset make_synthetic(std::size_t count, std::uint64_t seed, const SyntheticSpec& spec, Origin origin) {
  if (spec.height < 4 || spec.width < 4 || spec.num_classes < 2) {
    throw std::invalid_argument("synthetic: image must be at least 4x4 with 2 classes");
  }
  const Shape shape{spec.height, spec.width, 1};
  const std::size_t pixels = shape.size();

  std::vector<std::vector<float>> prototypes;
  Rng proto_rng(spec.prototype_seed);
  for (int k = 0; k < spec.num_classes; ++k) {
    std::vector<double> img(pixels, 0.0);
    const int blobs = 2 + static_cast<int>(proto_rng.below(2));
    for (int b = 0; b < blobs; ++b) {
      // Keep blob centres off the outer two rows/cols so corner triggers stay distinctive.
      const double cy = proto_rng.uniform(1.5, spec.height - 2.5);
      const double cx = proto_rng.uniform(1.5, spec.width - 2.5);
      const double sigma = proto_rng.uniform(0.8, 1.6);
      for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
          const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
          img[static_cast<std::size_t>(y) * spec.width + x] += std::exp(-d2 / (2 * sigma * sigma));
        }
      }
    }
    const double peak = *std::max_element(img.begin(), img.end());
    std::vector<float> proto(pixels);
    for (std::size_t i = 0; i < pixels; ++i) proto[i] = static_cast<float>(0.8 * img[i] / peak);
    prototypes.push_back(std::move(proto));
  }

  Dataset data{shape, spec.num_classes, {}, {}, {}, origin};
  data.features.resize(count * pixels);
  data.labels.resize(count);
  data.poisoned.assign(count, 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(spec.num_classes));
    data.labels[i] = label;
    for (std::size_t p = 0; p < pixels; ++p) {
      const double v = prototypes[static_cast<std::size_t>(label)][p] + spec.noise * rng.normal();
      data.features[i * pixels + p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return data;
}

}  // namespace fedunlearn
