#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "senn/evolution.hpp"

namespace senn {

enum class DatasetSource { synthetic, csv, idx };

std::string dataset_source_name(DatasetSource source);

// Exactly one source feeds a run. csv/idx test paths are optional: when
// absent, the training file is split by train_fraction.
struct DatasetSpec {
  DatasetSource source = DatasetSource::synthetic;

  std::string csv_train;
  std::string csv_test;
  std::string idx_train_images;
  std::string idx_train_labels;
  std::string idx_test_images;
  std::string idx_test_labels;

  std::int32_t classes = 3;      // synthetic only
  std::int32_t dims = 20;        // synthetic only
  std::int32_t per_class = 1000; // synthetic only
  double separation = 6.0;       // synthetic only

  double train_fraction = 0.75;
};

// Flat `key = value` experiment description; see parse_config for the key
// list. Defaults describe a small self-contained synthetic run.
struct ExperimentConfig {
  DatasetSpec data;
  std::vector<std::int32_t> hidden_layers{64, 64};
  Strategy strategy = Strategy::set;

  // Exactly one sparsity control: an explicit epsilon wins; otherwise
  // epsilon is calibrated so the expected density hits target_mu.
  std::optional<double> epsilon;
  double target_mu = 0.1;

  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;

  EvolutionParams evolution;
  ControllerConstants controller;
  SensitivityForm sensitivity_form = SensitivityForm::paper;
  std::size_t path_cap = 10000;
  bool budget_preserving = true;

  double dropout = 0.5;  // dense strategy only
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  // Cross-field checks (ranges, required paths, exclusive sparsity control).
  void validate() const;
};

// Parses the documented flat key = value format ('#' starts a comment,
// blank lines ignored). Unknown keys, type mismatches and range violations
// raise positioned errors ("path:line: ...").
ExperimentConfig parse_config(const std::string& path);

// Same parser over an in-memory body; origin labels error positions.
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

}  // namespace senn
