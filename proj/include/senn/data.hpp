#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "senn/errors.hpp"
#include "senn/matrix.hpp"

namespace senn {

// Per-feature statistics captured from a training split and applied to every
// split normalized with it.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> scale;  // 0 marks a constant feature (mapped to 0)
};

struct Dataset {
  Matrix features;                    // n x d
  std::vector<std::int32_t> labels;   // class indices in [0, class_count)
  std::int32_t class_count = 0;
  std::optional<FeatureStats> stats;  // set once normalized

  std::size_t size() const { return labels.size(); }
  std::size_t feature_count() const { return features.cols(); }
};

// IDX binary files, big-endian: images magic 0x00000803 then count/rows/cols
// and one unsigned byte per pixel (scaled to [0,1] by /255); labels magic
// 0x00000801 then count and one byte per label. Image and label counts must
// match.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Comma-separated numeric table, optional header auto-detected by a
// non-numeric first row. label_column selects the (integral) label column;
// -1 means the last column. Remaining columns become features, row order
// preserved.
Dataset load_csv(const std::string& path, std::int32_t label_column = -1);

// Writes features followed by the label as the last column, losslessly
// re-parseable by load_csv.
void save_csv(const Dataset& dataset, const std::string& path);

// C spherical Gaussian clusters in d dimensions: class c is centered at
// separation * u_c with u_c a unit direction drawn deterministically from
// seed, unit-variance noise. Samples are emitted class-major.
Dataset synthetic_gaussians(std::int32_t classes, std::int32_t dims,
                            std::int32_t per_class, double separation,
                            std::uint64_t seed);

// Same, with an explicit per-class count vector.
Dataset synthetic_gaussians(std::int32_t dims, const std::vector<std::int32_t>& per_class,
                            double separation, std::uint64_t seed);

// Standardizes every dataset with the train split's per-feature mean/stddev.
// Constant features map to exactly 0.
void normalize(Dataset& train, std::vector<Dataset*> others = {});

// Deterministic mini-batch plan: a permutation of [0, n) determined by
// (shuffle_seed, epoch_index), cut into batches of batch_size (last one may
// be short).
std::vector<std::vector<std::int32_t>> batches(std::size_t n, std::size_t batch_size,
                                               std::uint64_t shuffle_seed,
                                               std::uint64_t epoch_index);

// Materializes the rows selected by `indices`.
std::pair<Matrix, std::vector<std::int32_t>> gather(const Dataset& dataset,
                                                    const std::vector<std::int32_t>& indices);

// Deterministic stratified split: first `fraction` of each class (by a seeded
// shuffle) goes to the first dataset, the rest to the second. Original row
// order is preserved within each side.
std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, double fraction,
                                             std::uint64_t seed);

// Seeded stratified subsample keeping round(fraction * n_c) rows of each
// class c, original row order preserved. Throws ConsistencyError if any class
// would vanish.
Dataset stratified_subsample(const Dataset& dataset, double fraction, std::uint64_t seed);

}  // namespace senn
