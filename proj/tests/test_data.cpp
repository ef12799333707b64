#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "senn/data.hpp"
#include "senn/rng.hpp"

using namespace senn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "senn_test_data") {
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

void push_be32(std::vector<unsigned char>& bytes, std::uint32_t v) {
  bytes.push_back(static_cast<unsigned char>(v >> 24));
  bytes.push_back(static_cast<unsigned char>(v >> 16));
  bytes.push_back(static_cast<unsigned char>(v >> 8));
  bytes.push_back(static_cast<unsigned char>(v));
}

std::vector<unsigned char> image_file(std::uint32_t magic, std::uint32_t count,
                                      std::uint32_t rows, std::uint32_t cols,
                                      const std::vector<unsigned char>& pixels) {
  std::vector<unsigned char> bytes;
  push_be32(bytes, magic);
  push_be32(bytes, count);
  push_be32(bytes, rows);
  push_be32(bytes, cols);
  bytes.insert(bytes.end(), pixels.begin(), pixels.end());
  return bytes;
}

std::vector<unsigned char> label_file(std::uint32_t magic, std::uint32_t count,
                                      const std::vector<unsigned char>& labels) {
  std::vector<unsigned char> bytes;
  push_be32(bytes, magic);
  push_be32(bytes, count);
  bytes.insert(bytes.end(), labels.begin(), labels.end());
  return bytes;
}

std::string caught_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

Dataset indexed_dataset(const std::vector<std::int32_t>& labels) {
  Dataset d;
  d.features = Matrix(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    d.features(i, 0) = static_cast<double>(i);
  }
  d.labels = labels;
  d.class_count = *std::max_element(labels.begin(), labels.end()) + 1;
  return d;
}

}  // namespace

TEST_CASE("binary image files load with exact pixel scaling") {
  TempDir dir;
  const auto images = dir.path / "imgs";
  const auto labels = dir.path / "lbls";
  write_bytes(images, image_file(0x00000803u, 2, 2, 2, {0, 255, 128, 64, 10, 20, 30, 40}));
  write_bytes(labels, label_file(0x00000801u, 2, {1, 0}));

  const Dataset data = load_idx(images.string(), labels.string());
  CHECK(data.size() == 2);
  CHECK(data.feature_count() == 4);
  CHECK(data.features(0, 0) == 0.0);
  CHECK(data.features(0, 1) == 1.0);
  CHECK(data.features(0, 2) == 128.0 / 255.0);
  CHECK(data.features(0, 3) == 64.0 / 255.0);
  CHECK(data.features(1, 0) == 10.0 / 255.0);
  CHECK(data.labels == std::vector<std::int32_t>{1, 0});
  CHECK(data.class_count == 2);
}

TEST_CASE("binary loading distinguishes malformed, truncated and mismatched files") {
  TempDir dir;
  const auto images = dir.path / "imgs";
  const auto labels = dir.path / "lbls";
  const std::vector<unsigned char> pixels{0, 255, 128, 64, 10, 20, 30, 40};
  write_bytes(images, image_file(0x00000803u, 2, 2, 2, pixels));
  write_bytes(labels, label_file(0x00000801u, 2, {1, 0}));

  SUBCASE("wrong image magic") {
    write_bytes(images, image_file(0x00000802u, 2, 2, 2, pixels));
    CHECK_THROWS_AS(load_idx(images.string(), labels.string()), FormatError);
  }
  SUBCASE("wrong label magic") {
    write_bytes(labels, label_file(0x00000803u, 2, {1, 0}));
    CHECK_THROWS_AS(load_idx(images.string(), labels.string()), FormatError);
  }
  SUBCASE("truncated pixel data") {
    auto bytes = image_file(0x00000803u, 2, 2, 2, pixels);
    bytes.pop_back();
    write_bytes(images, bytes);
    CHECK_THROWS_AS(load_idx(images.string(), labels.string()), InputError);
  }
  SUBCASE("truncated header") {
    write_bytes(images, {0x00, 0x00, 0x08});
    CHECK_THROWS_AS(load_idx(images.string(), labels.string()), InputError);
  }
  SUBCASE("truncated label data") {
    write_bytes(labels, label_file(0x00000801u, 2, {1}));
    CHECK_THROWS_AS(load_idx(images.string(), labels.string()), InputError);
  }
  SUBCASE("label count mismatch") {
    write_bytes(labels, label_file(0x00000801u, 3, {1, 0, 1}));
    CHECK_THROWS_AS(load_idx(images.string(), labels.string()), ConsistencyError);
  }
  SUBCASE("zero image dimensions") {
    write_bytes(images, image_file(0x00000803u, 2, 0, 2, {}));
    CHECK_THROWS_AS(load_idx(images.string(), labels.string()), FormatError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_idx((dir.path / "absent").string(), labels.string()), InputError);
  }
}

TEST_CASE("tabular files load with header detection and label extraction") {
  TempDir dir;
  const auto path = dir.path / "table.csv";
  write_text(path, "alpha,beta,label\n1.5,2.5,0\n\n-3,0.25,1\n");

  const Dataset data = load_csv(path.string());
  CHECK(data.size() == 2);
  CHECK(data.feature_count() == 2);
  CHECK(data.features(0, 0) == 1.5);
  CHECK(data.features(1, 1) == 0.25);
  CHECK(data.labels == std::vector<std::int32_t>{0, 1});
  CHECK(data.class_count == 2);

  // explicit label column keeps the remaining columns in order
  write_text(path, "2,0.5,0.75\n0,1.5,2.5\n");
  const Dataset by_first = load_csv(path.string(), 0);
  CHECK(by_first.labels == std::vector<std::int32_t>{2, 0});
  CHECK(by_first.features(0, 0) == 0.5);
  CHECK(by_first.features(0, 1) == 0.75);
}

TEST_CASE("tabular loading reports the offending line") {
  TempDir dir;
  const auto path = dir.path / "bad.csv";

  write_text(path, "1,2,0\n1,2\n");
  CHECK_THROWS_AS(load_csv(path.string()), FormatError);
  const auto ragged = caught_message([&] { load_csv(path.string()); });
  CHECK(ragged.find("line 2") != std::string::npos);

  write_text(path, "1,2,0\n1,x,0\n");
  CHECK_THROWS_AS(load_csv(path.string()), FormatError);

  write_text(path, "1,2,0.5\n");
  CHECK_THROWS_AS(load_csv(path.string()), FormatError);
  write_text(path, "1,2,-1\n");
  CHECK_THROWS_AS(load_csv(path.string()), FormatError);
  write_text(path, "5\n6\n");
  CHECK_THROWS_AS(load_csv(path.string()), FormatError);

  write_text(path, "");
  CHECK_THROWS_AS(load_csv(path.string()), InputError);
  write_text(path, "only,a,header\n");
  CHECK_THROWS_AS(load_csv(path.string()), InputError);
  write_text(path, "1,2,0\n");
  CHECK_THROWS_AS(load_csv(path.string(), 5), ParameterError);
  CHECK_THROWS_AS(load_csv((dir.path / "absent.csv").string()), InputError);
}

TEST_CASE("saving and reloading a table is lossless") {
  TempDir dir;
  const auto path = dir.path / "roundtrip.csv";
  const Dataset original = synthetic_gaussians(3, 4, 5, 2.0, 999);
  save_csv(original, path.string());
  const Dataset reloaded = load_csv(path.string());

  REQUIRE(reloaded.size() == original.size());
  REQUIRE(reloaded.feature_count() == original.feature_count());
  CHECK(reloaded.features == original.features);
  CHECK(reloaded.labels == original.labels);
  CHECK(reloaded.class_count == original.class_count);
}

TEST_CASE("synthetic clusters are reproducible and class-major") {
  const Dataset a = synthetic_gaussians(3, 4, 10, 5.0, 42);
  const Dataset b = synthetic_gaussians(3, 4, 10, 5.0, 42);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(a.size() == 30);
  CHECK(a.class_count == 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.labels[i] == static_cast<std::int32_t>(i / 10));
  }

  const Dataset c = synthetic_gaussians(3, 4, 10, 5.0, 43);
  CHECK(a.features != c.features);

  const Dataset uneven = synthetic_gaussians(4, {2, 5, 3}, 1.0, 7);
  CHECK(uneven.size() == 10);
  CHECK(uneven.class_count == 3);
  CHECK(std::count(uneven.labels.begin(), uneven.labels.end(), 1) == 5);

  CHECK_THROWS_AS(synthetic_gaussians(0, 4, 10, 5.0, 1), ParameterError);
  CHECK_THROWS_AS(synthetic_gaussians(3, 0, 10, 5.0, 1), ParameterError);
  CHECK_THROWS_AS(synthetic_gaussians(3, 4, 0, 5.0, 1), ParameterError);
  CHECK_THROWS_AS(synthetic_gaussians(3, 4, 10, -1.0, 1), ParameterError);
}

TEST_CASE("well-separated clusters are linearly recoverable") {
  const Dataset data = synthetic_gaussians(2, 5, 200, 8.0, 12);
  std::vector<std::vector<double>> means(2, std::vector<double>(5, 0.0));
  std::vector<double> counts(2, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto c = static_cast<std::size_t>(data.labels[i]);
    counts[c] += 1.0;
    for (std::size_t j = 0; j < 5; ++j) means[c][j] += data.features(i, j);
  }
  for (std::size_t c = 0; c < 2; ++c) {
    for (double& v : means[c]) v /= counts[c];
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double d0 = 0.0;
    double d1 = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      const double v = data.features(i, j);
      d0 += (v - means[0][j]) * (v - means[0][j]);
      d1 += (v - means[1][j]) * (v - means[1][j]);
    }
    const std::int32_t guess = d0 <= d1 ? 0 : 1;
    correct += guess == data.labels[i];
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(data.size()) >= 0.99);
}

TEST_CASE("normalization standardizes training features and reuses its statistics") {
  Dataset train;
  train.features = Matrix(3, 3);
  const double f0[] = {1.0, 2.0, 3.0};
  const double f2[] = {0.0, 10.0, 20.0};
  for (std::size_t i = 0; i < 3; ++i) {
    train.features(i, 0) = f0[i];
    train.features(i, 1) = 5.0;  // constant feature
    train.features(i, 2) = f2[i];
  }
  train.labels = {0, 1, 0};
  train.class_count = 2;

  Dataset test;
  test.features = Matrix(1, 3);
  test.features(0, 0) = 4.0;
  test.features(0, 1) = 9.0;
  test.features(0, 2) = 10.0;
  test.labels = {1};
  test.class_count = 2;

  normalize(train, {&test});
  const double sd0 = std::sqrt(2.0 / 3.0);
  CHECK(train.features(0, 0) == doctest::Approx((1.0 - 2.0) / sd0).epsilon(1e-12));
  CHECK(train.features(2, 0) == doctest::Approx((3.0 - 2.0) / sd0).epsilon(1e-12));
  for (std::size_t i = 0; i < 3; ++i) CHECK(train.features(i, 1) == 0.0);

  double mean = 0.0;
  for (std::size_t i = 0; i < 3; ++i) mean += train.features(i, 2);
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));

  // the test split is shifted by the train statistics, not its own
  CHECK(test.features(0, 0) == doctest::Approx((4.0 - 2.0) / sd0).epsilon(1e-12));
  CHECK(test.features(0, 1) == 0.0);
  REQUIRE(train.stats.has_value());
  REQUIRE(test.stats.has_value());
  CHECK(test.stats->mean == train.stats->mean);

  Dataset narrow;
  narrow.features = Matrix(1, 2, 1.0);
  narrow.labels = {0};
  CHECK_THROWS_AS(normalize(train, {&narrow}), ConsistencyError);
  Dataset empty;
  CHECK_THROWS_AS(normalize(empty), InputError);
}

TEST_CASE("batch plans permute every index exactly once") {
  const auto plan = batches(10, 3, 77, 0);
  REQUIRE(plan.size() == 4);
  CHECK(plan[0].size() == 3);
  CHECK(plan[3].size() == 1);

  std::vector<std::int32_t> flat;
  for (const auto& batch : plan) flat.insert(flat.end(), batch.begin(), batch.end());
  std::sort(flat.begin(), flat.end());
  std::vector<std::int32_t> expected(10);
  std::iota(expected.begin(), expected.end(), 0);
  CHECK(flat == expected);

  CHECK(batches(10, 3, 77, 0) == plan);
  CHECK(batches(10, 3, 77, 1) != plan);
  CHECK(batches(10, 3, 78, 0) != plan);
  CHECK(batches(4, 9, 1, 0).size() == 1);
  CHECK(batches(0, 3, 1, 0).empty());
  CHECK_THROWS_AS(batches(10, 0, 1, 0), ParameterError);
}

TEST_CASE("gather materializes rows in the requested order") {
  const Dataset data = indexed_dataset({0, 1, 0, 1});
  const auto [features, labels] = gather(data, {2, 0, 2});
  REQUIRE(features.rows() == 3);
  CHECK(features(0, 0) == 2.0);
  CHECK(features(1, 0) == 0.0);
  CHECK(features(2, 0) == 2.0);
  CHECK(labels == std::vector<std::int32_t>{0, 0, 0});
  CHECK_THROWS_AS(gather(data, {4}), ConsistencyError);
  CHECK_THROWS_AS(gather(data, {-1}), ConsistencyError);
}

TEST_CASE("stratified splits keep class shares and row order") {
  const Dataset data = indexed_dataset({0, 0, 1, 0, 0, 1, 0, 1, 0, 1});  // 6 zeros, 4 ones
  const auto [head, tail] = stratified_split(data, 0.75, 5);
  CHECK(head.size() == 8);  // ceil(4.5) + ceil(3)
  CHECK(tail.size() == 2);
  CHECK(std::count(head.labels.begin(), head.labels.end(), 0) == 5);
  CHECK(std::count(head.labels.begin(), head.labels.end(), 1) == 3);

  // row order survives within each side, and the sides partition the rows
  std::vector<double> seen;
  for (const Dataset* part : {&head, &tail}) {
    double prev = -1.0;
    for (std::size_t i = 0; i < part->size(); ++i) {
      const double v = part->features(i, 0);
      CHECK(v > prev);
      prev = v;
      seen.push_back(v);
    }
  }
  std::sort(seen.begin(), seen.end());
  for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == static_cast<double>(i));

  const auto [head2, tail2] = stratified_split(data, 0.75, 5);
  CHECK(head2.features == head.features);

  CHECK_THROWS_AS(stratified_split(data, 1.0, 5), ParameterError);
  CHECK_THROWS_AS(stratified_split(data, 0.0, 5), ParameterError);
}

TEST_CASE("stratified subsampling rounds per-class counts and keeps order") {
  const Dataset data = indexed_dataset({0, 0, 1, 0, 0, 1, 0, 1, 0, 1});
  const Dataset sub = stratified_subsample(data, 0.4, 9);
  CHECK(std::count(sub.labels.begin(), sub.labels.end(), 0) == 2);  // round(2.4)
  CHECK(std::count(sub.labels.begin(), sub.labels.end(), 1) == 2);  // round(1.6)
  double prev = -1.0;
  for (std::size_t i = 0; i < sub.size(); ++i) {
    CHECK(sub.features(i, 0) > prev);
    prev = sub.features(i, 0);
  }

  const Dataset whole = stratified_subsample(data, 1.0, 9);
  CHECK(whole.features == data.features);
  CHECK(whole.labels == data.labels);

  CHECK_THROWS_AS(stratified_subsample(data, 0.05, 9), ConsistencyError);
  CHECK_THROWS_AS(stratified_subsample(data, 1.5, 9), ParameterError);
}
