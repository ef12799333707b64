#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "senn/config.hpp"
#include "senn/data.hpp"
#include "senn/network.hpp"

namespace senn {

// One metrics row per epoch (epoch is 1-based). lambda/zeta/delta are the
// values the epoch's evolution step ran with.
struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t active_connections = 0;
  double mu = 0.0;
  double lambda = 0.0;
  double zeta = 0.0;
  double delta = 0.0;
  double c_prim = 0.0;
  double c_sec = 0.0;
  std::size_t removed_count = 0;
  std::size_t added_count = 0;
  double epoch_wall_ms = 0.0;
};

// The exact CSV header. Determinism contracts exclude the wall-time column.
std::string metrics_header();
std::string metrics_row(const EpochMetrics& m);

struct LoadedMetrics {
  std::vector<EpochMetrics> rows;
  bool aborted = false;
  std::string abort_reason;
};

LoadedMetrics load_metrics_csv(const std::string& path);

// Raw (un-normalized) train/test splits ready for a run.
struct DataSplits {
  Dataset train;
  Dataset test;
};

// Loads or generates the configured source and splits it. No normalization
// happens here so callers may still subsample.
DataSplits prepare_data(const ExperimentConfig& config);

struct RunResult {
  std::vector<EpochMetrics> metrics;
  bool aborted = false;
  std::string abort_reason;
  std::string metrics_path;     // empty when output_dir is empty
  std::string checkpoint_path;  // written only for completed runs
};

// Normalizes the splits with train statistics, trains per the config
// (batch SGD, epoch-end evolution, optional time-varying parameters),
// appends one metrics row per epoch and writes metrics.csv plus a final
// checkpoint under config.output_dir (pass output_dir = "" to skip files).
/// A non-finite loss or gradient aborts the run: partial metrics plus an
// abort marker line are still written and RunResult.aborted is set.
RunResult run_on(const ExperimentConfig& config, DataSplits splits);

// prepare_data + run_on.
RunResult run(const ExperimentConfig& config);

struct StrategySummary {
  std::string label;
  std::size_t epochs = 0;
  double final_accuracy = 0.0;
  double best_accuracy = 0.0;
  std::optional<std::size_t> epochs_to_threshold;
  std::size_t final_active = 0;
  bool aborted = false;
};

// Side-by-side final/best accuracy, epochs-to-threshold (first epoch whose
// test accuracy reaches the threshold) and parameter counts. All files must
// cover the same number of epochs.
struct ComparisonReport {
  double threshold = 0.7;
  std::vector<StrategySummary> rows;

  std::string text() const;
  std::string csv() const;
};

ComparisonReport compare_report(const std::vector<std::string>& metric_files,
                                double threshold = 0.7);

struct SubsampleRow {
  double fraction = 0.0;
  std::size_t train_size = 0;
  double final_accuracy = 0.0;
  double best_accuracy = 0.0;
  std::optional<std::size_t> epochs_to_threshold;
  bool aborted = false;
};

// Per-fraction training-set subsample grid (stratified, seeded); each
// fraction runs under the same master seed and writes into its own
// subsample_<percent> directory. Fraction 1.0 reproduces the base run.
struct SubsampleReport {
  std::vector<SubsampleRow> rows;

  std::string text() const;
  std::string csv() const;
};

SubsampleReport subsample_experiment(const ExperimentConfig& config,
                                     const std::vector<double>& fractions,
                                     double threshold = 0.7);

}  // namespace senn
