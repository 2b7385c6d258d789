#include <cmath>
#include <stdexcept>
#include <fstream>
#include <set>

#include "../support/fixtures.hpp"
#include "doctest.h"
#include "fedunlearn/data.hpp"

using namespace fedunlearn;

namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> be32(std::uint32_t v) {
  return {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 8),
          static_cast<unsigned char>(v)};
}

// Two 2x2 images with labels 3 and 7, written byte by byte.
void write_fixture(const std::filesystem::path& images, const std::filesystem::path& labels,
                   std::uint32_t image_magic = 0x803, std::uint32_t label_count = 2, bool truncate = false) {
  std::vector<unsigned char> img;
  for (auto v : {image_magic, 2u, 2u, 2u}) {
    auto b = be32(v);
    img.insert(img.end(), b.begin(), b.end());
  }
  for (unsigned char px : {0, 255, 51, 102, 255, 0, 0, 0}) img.push_back(px);
  if (truncate) img.resize(img.size() - 3);
  write_bytes(images, img);
  std::vector<unsigned char> lab;
  for (auto v : {0x801u, label_count}) {
    auto b = be32(v);
    lab.insert(lab.end(), b.begin(), b.end());
  }
  for (unsigned i = 0; i < label_count; ++i) lab.push_back(i == 0 ? 3 : 7);
  write_bytes(labels, lab);
}

ClientDataset as_client(const Dataset& d) {
  ClientDataset c;
  c.train = d;
  c.validation = Dataset{d.shape, d.num_classes, {}, {}, {}, Origin::train};
  return c;
}

IdxError::Kind idx_error_kind(const std::filesystem::path& images, const std::filesystem::path& labels) {
  try {
    load_idx(images, labels);
  } catch (const IdxError& e) {
    return e.kind();
  }
  FAIL("expected IdxError");
  return IdxError::Kind::io;
}

}  // namespace

TEST_CASE("IDX loading of a hand-written fixture") {
  fixtures::TempDir tmp("idx");
  const auto img = tmp.path() / "img", lab = tmp.path() / "lab";
  write_fixture(img, lab);
  const auto d = load_idx(img, lab);
  REQUIRE(d.size() == 2);
  CHECK((d.shape == Shape{2, 2, 1}));
  CHECK(d.labels == std::vector<int>{3, 7});
  CHECK(d.features[0] == 0.0f);
  CHECK(d.features[1] == 1.0f);
  CHECK(d.features[2] == doctest::Approx(0.2));
  CHECK(d.features[3] == doctest::Approx(0.4));
  CHECK(d.poisoned_count() == 0);

  SUBCASE("save and reload is exact") {
    const auto img2 = tmp.path() / "img2", lab2 = tmp.path() / "lab2";
    save_idx(d, img2, lab2);
    const auto again = load_idx(img2, lab2);
    CHECK(again.features == d.features);
    CHECK(again.labels == d.labels);
  }
}

TEST_CASE("IDX error kinds") {
  fixtures::TempDir tmp("idx-err");
  const auto img = tmp.path() / "img", lab = tmp.path() / "lab";
  SUBCASE("bad magic") {
    write_fixture(img, lab, 0x804);
    CHECK(idx_error_kind(img, lab) == IdxError::Kind::bad_magic);
  }
  SUBCASE("count mismatch") {
    write_fixture(img, lab, 0x803, 3);
    CHECK(idx_error_kind(img, lab) == IdxError::Kind::count_mismatch);
  }
  SUBCASE("truncated") {
    write_fixture(img, lab, 0x803, 2, true);
    CHECK(idx_error_kind(img, lab) == IdxError::Kind::truncated);
  }
  SUBCASE("missing file") { CHECK(idx_error_kind(tmp.path() / "nope", lab) == IdxError::Kind::io); }
}

TEST_CASE("partition gives disjoint equal shards") {
  const auto d = fixtures::random_dataset(103, Shape{2, 2, 1}, 10, 1);
  const auto clients = partition(d, 5, 42);
  REQUIRE(clients.size() == 5);
  std::set<std::vector<float>> seen;
  for (int c = 0; c < 5; ++c) {
    CHECK(clients[c].client_id == c);
    CHECK(clients[c].train.size() == 20);
    for (std::size_t i = 0; i < clients[c].train.size(); ++i) {
      auto img = clients[c].train.image(i);
      CHECK(seen.insert(std::vector<float>(img.begin(), img.end())).second);
    }
  }
  CHECK(seen.size() == 100);
  const auto again = partition(d, 5, 42);
  CHECK(again[3].train.features == clients[3].train.features);
  CHECK_THROWS_AS(partition(d, 1, 42), std::invalid_argument);
}

TEST_CASE("backdoor injection") {
  auto d = fixtures::random_dataset(10, Shape{6, 6, 1}, 10, 2);
  for (std::size_t i = 0; i < 10; ++i) d.labels[i] = static_cast<int>(i % 5);  // no label 9
  const TriggerSpec trig{3, Corner::bottom_right, 1.0f, 9, 0.8};
  const auto out = inject_backdoor(as_client(d), trig, 7);
  CHECK(out.poisoned_count() == 8);
  const auto offsets = trig.offsets(d.shape);
  CHECK(offsets.size() == 9);
  for (std::size_t i = 0; i < 10; ++i) {
    const auto img = out.train.image(i);
    if (out.train.poisoned[i]) {
      CHECK(out.train.labels[i] == 9);
      for (auto [r, c] : offsets) {
        CHECK(r >= 3);
        CHECK(c >= 3);
        CHECK(img[static_cast<std::size_t>(r * 6 + c)] == 1.0f);
      }
    } else {
      CHECK(out.train.labels[i] == d.labels[i]);
      CHECK(std::equal(img.begin(), img.end(), d.image(i).begin()));
    }
  }
  SUBCASE("zero fraction is a no-op") {
    auto none = trig;
    none.poison_fraction = 0.0;
    const auto same = inject_backdoor(as_client(d), none, 7);
    CHECK(same.train.features == d.features);
    CHECK(same.poisoned_count() == 0);
  }
  SUBCASE("trigger larger than the image") {
    auto huge = trig;
    huge.size = 7;
    CHECK_THROWS_AS(inject_backdoor(as_client(d), huge, 7), std::invalid_argument);
  }
  SUBCASE("target label out of range") {
    auto bad = trig;
    bad.target_label = 10;
    CHECK_THROWS_AS(inject_backdoor(as_client(d), bad, 7), std::invalid_argument);
  }
}

TEST_CASE("train/validation split") {
  const auto d = fixtures::random_dataset(100, Shape{2, 2, 1}, 10, 3);
  const auto out = split_train_val(as_client(d), 0.1, 9);
  CHECK(out.train.size() == 90);
  CHECK(out.validation.size() == 10);
  auto merged = concat(out.train, out.validation);
  std::multiset<std::vector<float>> a, b;
  for (std::size_t i = 0; i < 100; ++i) {
    a.insert(std::vector<float>(d.image(i).begin(), d.image(i).end()));
    b.insert(std::vector<float>(merged.image(i).begin(), merged.image(i).end()));
  }
  CHECK(a == b);
  CHECK_THROWS_AS(split_train_val(as_client(d), 1.0, 9), std::invalid_argument);
  const auto tiny = fixtures::random_dataset(3, Shape{2, 2, 1}, 10, 3);
  CHECK_THROWS_AS(split_train_val(as_client(tiny), 0.1, 9), std::invalid_argument);
}

TEST_CASE("validation can be kept clean of poisoned examples") {
  auto d = fixtures::random_dataset(50, Shape{4, 4, 1}, 10, 4);
  for (auto& l : d.labels) l = l % 9;
  const TriggerSpec trig{2, Corner::top_left, 1.0f, 9, 0.5};
  const auto poisoned = inject_backdoor(as_client(d), trig, 1);
  const auto out = split_train_val(poisoned, 0.2, 2, true);
  CHECK(out.validation.poisoned_count() == 0);
  CHECK(out.poisoned_count() == 25);
}

TEST_CASE("backdoor test set excludes target-label examples") {
  auto d = fixtures::random_dataset(40, Shape{4, 4, 1}, 10, 5);
  const TriggerSpec trig{2, Corner::bottom_left, 0.9f, 9, 0.0};
  std::size_t expected = 0;
  for (int l : d.labels) expected += l != 9 ? 1 : 0;
  const auto bd = make_backdoor_testset(d, trig);
  CHECK(bd.size() == expected);
  for (std::size_t i = 0; i < bd.size(); ++i) {
    CHECK(bd.labels[i] != 9);
    CHECK(bd.image(i)[12] == doctest::Approx(0.9));
  }
}

TEST_CASE("synthetic data is seeded and well formed") {
  const SyntheticSpec spec;
  const auto a = make_synthetic(200, 5, spec);
  const auto b = make_synthetic(200, 5, spec);
  const auto c = make_synthetic(200, 6, spec);
  a.validate();
  CHECK(a.features == b.features);
  CHECK(a.features != c.features);
  CHECK((a.shape == Shape{8, 8, 1}));
  for (float v : a.features) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  std::vector<int> per_class(10, 0);
  for (int l : a.labels) ++per_class[static_cast<std::size_t>(l)];
  for (int n : per_class) CHECK(n == 20);
}
