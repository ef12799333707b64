#include "senn/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "senn/checkpoint.hpp"
#include "senn/path_analysis.hpp"
#include "senn/rng.hpp"
#include "senn/sensitivity.hpp"
#include "senn/topology.hpp"

namespace senn {

namespace {

constexpr const char* kAbortPrefix = "# aborted: ";

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

std::string format_accuracy(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.4f", value);
  return buffer;
}

bool parse_field_double(const std::string& text, double& out) {
  const char* begin = text.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end != begin && *end == '\0';
}

bool parse_field_size(const std::string& text, std::size_t& out) {
  if (text.empty() || text[0] == '-') return false;
  const char* begin = text.c_str();
  char* end = nullptr;
  out = static_cast<std::size_t>(std::strtoull(begin, &end, 10));
  return end != begin && *end == '\0';
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

Dataset load_source_train(const ExperimentConfig& config) {
  switch (config.data.source) {
    case DatasetSource::synthetic:
      return synthetic_gaussians(config.data.classes, config.data.dims,
                                 config.data.per_class, config.data.separation,
                                 derive_seed(config.seed, SeedConsumer::synthetic_data));
    case DatasetSource::csv:
      return load_csv(config.data.csv_train);
    case DatasetSource::idx:
      return load_idx(config.data.idx_train_images, config.data.idx_train_labels);
  }
  throw ParameterError("unknown dataset source");
}

std::optional<Dataset> load_source_test(const ExperimentConfig& config) {
  switch (config.data.source) {
    case DatasetSource::synthetic:
      return std::nullopt;
    case DatasetSource::csv:
      if (config.data.csv_test.empty()) return std::nullopt;
      return load_csv(config.data.csv_test);
    case DatasetSource::idx:
      if (config.data.idx_test_images.empty()) return std::nullopt;
      return load_idx(config.data.idx_test_images, config.data.idx_test_labels);
  }
  throw ParameterError("unknown dataset source");
}

struct SummaryStats {
  double final_accuracy = 0.0;
  double best_accuracy = 0.0;
  std::optional<std::size_t> epochs_to_threshold;
};

SummaryStats summarize(const std::vector<EpochMetrics>& rows, double threshold) {
  SummaryStats stats;
  if (rows.empty()) return stats;
  stats.final_accuracy = rows.back().test_accuracy;
  for (const auto& row : rows) {
    stats.best_accuracy = std::max(stats.best_accuracy, row.test_accuracy);
    if (!stats.epochs_to_threshold && row.test_accuracy >= threshold) {
      stats.epochs_to_threshold = row.epoch;
    }
  }
  return stats;
}

std::string fraction_label(double fraction) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%g", fraction * 100.0);
  return buffer;
}

}  // namespace

std::string metrics_header() {
  return "epoch,train_loss,train_accuracy,test_accuracy,active_connections,mu,lambda,"
         "zeta,delta,C_prim,C_sec,removed_count,added_count,epoch_wall_ms";
}

std::string metrics_row(const EpochMetrics& m) {
  std::stringstream out;
  out << m.epoch << ',' << format_double(m.train_loss) << ','
      << format_double(m.train_accuracy) << ',' << format_double(m.test_accuracy) << ','
      << m.active_connections << ',' << format_double(m.mu) << ','
      << format_double(m.lambda) << ',' << format_double(m.zeta) << ','
      << format_double(m.delta) << ',' << format_double(m.c_prim) << ','
      << format_double(m.c_sec) << ',' << m.removed_count << ',' << m.added_count << ','
      << format_double(m.epoch_wall_ms);
  return out.str();
}

LoadedMetrics load_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty metrics file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != metrics_header()) {
    throw FormatError(path + ": unexpected metrics header");
  }

  LoadedMetrics loaded;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind(kAbortPrefix, 0) == 0) {
      loaded.aborted = true;
      loaded.abort_reason = line.substr(std::string(kAbortPrefix).size());
      continue;
    }
    const auto fields = split_commas(line);
    if (fields.size() != 14) {
      throw FormatError(path + ":" + std::to_string(line_number) + ": expected 14 fields");
    }
    EpochMetrics m;
    const bool ok = parse_field_size(fields[0], m.epoch) &&
                    parse_field_double(fields[1], m.train_loss) &&
                    parse_field_double(fields[2], m.train_accuracy) &&
                    parse_field_double(fields[3], m.test_accuracy) &&
                    parse_field_size(fields[4], m.active_connections) &&
                    parse_field_double(fields[5], m.mu) &&
                    parse_field_double(fields[6], m.lambda) &&
                    parse_field_double(fields[7], m.zeta) &&
                    parse_field_double(fields[8], m.delta) &&
                    parse_field_double(fields[9], m.c_prim) &&
                    parse_field_double(fields[10], m.c_sec) &&
                    parse_field_size(fields[11], m.removed_count) &&
                    parse_field_size(fields[12], m.added_count) &&
                    parse_field_double(fields[13], m.epoch_wall_ms);
    if (!ok) {
      throw FormatError(path + ":" + std::to_string(line_number) + ": malformed row");
    }
    loaded.rows.push_back(m);
  }
  return loaded;
}

DataSplits prepare_data(const ExperimentConfig& config) {
  config.validate();
  Dataset train = load_source_train(config);
  auto test = load_source_test(config);

  DataSplits splits;
  if (test.has_value()) {
    splits.train = std::move(train);
    splits.test = std::move(*test);
  } else {
    auto [head, tail] = stratified_split(
        train, config.data.train_fraction,
        derive_seed(config.seed, SeedConsumer::dataset_split));
    splits.train = std::move(head);
    splits.test = std::move(tail);
  }
  const std::int32_t classes = std::max(splits.train.class_count, splits.test.class_count);
  splits.train.class_count = classes;
  splits.test.class_count = classes;
  if (splits.train.feature_count() != splits.test.feature_count()) {
    throw ConsistencyError("train and test feature widths differ");
  }
  return splits;
}

RunResult run_on(const ExperimentConfig& config, DataSplits splits) {
  config.validate();
  if (splits.train.size() == 0 || splits.test.size() == 0) {
    throw InputError("both splits need at least one sample");
  }
  normalize(splits.train, {&splits.test});

  std::vector<std::int32_t> layer_sizes;
  layer_sizes.push_back(static_cast<std::int32_t>(splits.train.feature_count()));
  layer_sizes.insert(layer_sizes.end(), config.hidden_layers.begin(),
                     config.hidden_layers.end());
  layer_sizes.push_back(splits.train.class_count);

  const std::uint64_t topology_seed = derive_seed(config.seed, SeedConsumer::topology_init);
  SparseNetwork net =
      config.strategy == Strategy::dense
          ? fully_connected_init(layer_sizes, topology_seed)
          : erdos_renyi_init(layer_sizes,
                             config.epsilon ? *config.epsilon
                                            : calibrate_epsilon(layer_sizes, config.target_mu),
                             topology_seed);

  RunResult result;
  std::ofstream metrics_out;
  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
    result.metrics_path = config.output_dir + "/metrics.csv";
    metrics_out.open(result.metrics_path);
    if (!metrics_out) throw InputError("cannot open " + result.metrics_path + " for writing");
    metrics_out << metrics_header() << '\n';
  }

  const auto abort_run = [&](const std::string& reason) {
    result.aborted = true;
    result.abort_reason = reason;
    if (metrics_out.is_open()) {
      metrics_out << kAbortPrefix << reason << '\n';
      metrics_out.flush();
    }
  };

  EvolutionParams params = config.evolution;
  FeatureNorms norms(net.weight_layer_count());
  SensitivityAccumulator accumulator;
  EvolveContext ctx;
  ctx.feature_norms = &norms;
  ctx.sensitivity = &accumulator;
  ctx.sensitivity_form = config.sensitivity_form;
  ctx.path_cap = config.path_cap;
  ctx.budget_preserving = config.budget_preserving;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();

    if (config.strategy == Strategy::sensitivity) accumulator.reset(net);
    const auto plan = batches(splits.train.size(), config.batch_size,
                              derive_seed(config.seed, SeedConsumer::batch_shuffle),
                              epoch - 1);
    bool diverged = false;
    for (std::size_t bi = 0; bi < plan.size() && !diverged; ++bi) {
      auto [features, labels] = gather(splits.train, plan[bi]);
      DropoutSpec dropout{config.dropout,
                          derive_seed(config.seed, SeedConsumer::dropout, epoch - 1, bi)};
      const bool use_dropout = config.strategy == Strategy::dense && config.dropout > 0.0;
      const ForwardTrace trace = forward(net, features, use_dropout ? &dropout : nullptr);
      if (config.strategy == Strategy::path_weight) norms.update(trace);
      const BackwardResult back = backward(net, trace, labels);
      if (!std::isfinite(back.loss)) {
        abort_run("non-finite loss at epoch " + std::to_string(epoch));
        diverged = true;
        break;
      }
      if (config.strategy == Strategy::sensitivity) accumulator.accumulate(back.grads);
      try {
        sgd_step(net, back.grads, config.learning_rate);
      } catch (const NumericError&) {
        abort_run("non-finite gradient at epoch " + std::to_string(epoch));
        diverged = true;
      }
    }
    if (diverged) return result;

    const auto report =
        evolve_epoch(net, config.strategy, params, ctx,
                     derive_seed(config.seed, SeedConsumer::evolution, epoch - 1));
    const EvolutionParams used = report.params_before;
    if (params.time_varying && config.strategy != Strategy::dense) {
      params = update_params(params, config.controller, report.c_prim, report.c_sec);
    }

    const EvalResult train_eval = evaluate(net, splits.train);
    const EvalResult test_eval = evaluate(net, splits.test);
    if (!std::isfinite(train_eval.loss) || !std::isfinite(test_eval.loss)) {
      abort_run("non-finite loss at epoch " + std::to_string(epoch));
      return result;
    }

    EpochMetrics row;
    row.epoch = epoch;
    row.train_loss = train_eval.loss;
    row.train_accuracy = train_eval.accuracy;
    row.test_accuracy = test_eval.accuracy;
    row.active_connections = net.active_count();
    row.mu = static_cast<double>(net.active_count()) /
             static_cast<double>(net.mask().possible_count());
    row.lambda = used.lambda;
    row.zeta = used.zeta;
    row.delta = used.delta;
    row.c_prim = report.c_prim;
    row.c_sec = report.c_sec;
    row.removed_count = report.removed.size();
    row.added_count = report.added.size();
    row.epoch_wall_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - epoch_start)
                            .count();
    result.metrics.push_back(row);
    if (metrics_out.is_open()) {
      metrics_out << metrics_row(row) << '\n';
      metrics_out.flush();
    }
  }

  if (!config.output_dir.empty()) {
    result.checkpoint_path = config.output_dir + "/checkpoint.txt";
    save_checkpoint(net, result.checkpoint_path);
  }
  return result;
}

RunResult run(const ExperimentConfig& config) { return run_on(config, prepare_data(config)); }

ComparisonReport compare_report(const std::vector<std::string>& metric_files,
                                double threshold) {
  if (metric_files.size() < 2) {
    throw ParameterError("compare needs at least two metric files");
  }
  if (!(threshold > 0.0) || threshold > 1.0) {
    throw ParameterError("threshold must lie in (0, 1]");
  }

  ComparisonReport report;
  report.threshold = threshold;
  std::optional<std::size_t> epochs;
  for (const auto& path : metric_files) {
    const LoadedMetrics loaded = load_metrics_csv(path);
    if (loaded.rows.empty()) {
      throw ConsistencyError(path + ": no metric rows to compare");
    }
    if (!epochs) {
      epochs = loaded.rows.size();
    } else if (*epochs != loaded.rows.size()) {
      throw ConsistencyError("metric files cover different epoch counts");
    }
    const SummaryStats stats = summarize(loaded.rows, threshold);
    StrategySummary row;
    row.label = path;
    row.epochs = loaded.rows.size();
    row.final_accuracy = stats.final_accuracy;
    row.best_accuracy = stats.best_accuracy;
    row.epochs_to_threshold = stats.epochs_to_threshold;
    row.final_active = loaded.rows.back().active_connections;
    row.aborted = loaded.aborted;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string ComparisonReport::text() const {
  std::size_t label_width = 5;
  for (const auto& row : rows) label_width = std::max(label_width, row.label.size());

  std::stringstream out;
  char threshold_label[48];
  std::snprintf(threshold_label, sizeof threshold_label, "epochs_to_%.2g", threshold);
  out << std::string(label_width - 5, ' ') << "label  epochs  final_acc  best_acc  "
      << threshold_label << "  params\n";
  for (const auto& row : rows) {
    std::stringstream line;
    line << std::string(label_width - row.label.size(), ' ') << row.label << "  ";
    char fields[160];
    std::snprintf(fields, sizeof fields, "%6zu  %9s  %8s  %*s  %6zu", row.epochs,
                  format_accuracy(row.final_accuracy).c_str(),
                  format_accuracy(row.best_accuracy).c_str(),
                  static_cast<int>(std::string(threshold_label).size()),
                  row.epochs_to_threshold ? std::to_string(*row.epochs_to_threshold).c_str()
                                          : "-",
                  row.final_active);
    line << fields;
    if (row.aborted) line << "  (aborted)";
    out << line.str() << '\n';
  }
  return out.str();
}

std::string ComparisonReport::csv() const {
  std::stringstream out;
  out << "label,epochs,final_accuracy,best_accuracy,epochs_to_threshold,final_active,"
         "aborted\n";
  for (const auto& row : rows) {
    out << row.label << ',' << row.epochs << ',' << format_double(row.final_accuracy) << ','
        << format_double(row.best_accuracy) << ','
        << (row.epochs_to_threshold ? std::to_string(*row.epochs_to_threshold) : "") << ','
        << row.final_active << ',' << (row.aborted ? "1" : "0") << '\n';
  }
  return out.str();
}

SubsampleReport subsample_experiment(const ExperimentConfig& config,
                                     const std::vector<double>& fractions,
                                     double threshold) {
  if (fractions.empty()) throw ParameterError("subsample needs at least one fraction");
  for (double f : fractions) {
    if (!(f > 0.0) || f > 1.0) throw ParameterError("fractions must lie in (0, 1]");
  }
  const DataSplits base = prepare_data(config);

  SubsampleReport report;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double fraction = fractions[i];
    ExperimentConfig sub = config;
    if (!config.output_dir.empty()) {
      sub.output_dir = config.output_dir + "/subsample_" + fraction_label(fraction);
    }
    DataSplits splits;
    splits.test = base.test;
    splits.train = fraction < 1.0
                       ? stratified_subsample(
                             base.train, fraction,
                             derive_seed(config.seed, SeedConsumer::subsample, i))
                       : base.train;
    SubsampleRow row;
    row.fraction = fraction;
    row.train_size = splits.train.size();
    const RunResult result = run_on(sub, std::move(splits));
    const SummaryStats stats = summarize(result.metrics, threshold);
    row.final_accuracy = stats.final_accuracy;
    row.best_accuracy = stats.best_accuracy;
    row.epochs_to_threshold = stats.epochs_to_threshold;
    row.aborted = result.aborted;
    report.rows.push_back(row);
  }
  return report;
}

std::string SubsampleReport::text() const {
  std::stringstream out;
  out << "fraction  train_size  final_acc  best_acc  epochs_to_threshold\n";
  for (const auto& row : rows) {
    char fields[160];
    std::snprintf(fields, sizeof fields, "%8g  %10zu  %9s  %8s  %19s", row.fraction,
                  row.train_size, format_accuracy(row.final_accuracy).c_str(),
                  format_accuracy(row.best_accuracy).c_str(),
                  row.epochs_to_threshold ? std::to_string(*row.epochs_to_threshold).c_str()
                                          : "-");
    out << fields;
    if (row.aborted) out << "  (aborted)";
    out << '\n';
  }
  return out.str();
}

std::string SubsampleReport::csv() const {
  std::stringstream out;
  out << "fraction,train_size,final_accuracy,best_accuracy,epochs_to_threshold,aborted\n";
  for (const auto& row : rows) {
    out << format_double(row.fraction) << ',' << row.train_size << ','
        << format_double(row.final_accuracy) << ',' << format_double(row.best_accuracy)
        << ',' << (row.epochs_to_threshold ? std::to_string(*row.epochs_to_threshold) : "")
        << ',' << (row.aborted ? "1" : "0") << '\n';
  }
  return out.str();
}

}  // namespace senn
