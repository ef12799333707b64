#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "senn/checkpoint.hpp"
#include "senn/config.hpp"
#include "senn/experiment.hpp"

namespace {

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> fractions;
  std::stringstream stream(text);
  std::string piece;
  while (std::getline(stream, piece, ',')) {
    try {
      std::size_t used = 0;
      const double value = std::stod(piece, &used);
      if (used != piece.size()) throw std::invalid_argument(piece);
      fractions.push_back(value);
    } catch (const std::exception&) {
      throw senn::ParameterError("bad fraction '" + piece + "'");
    }
  }
  if (fractions.empty()) throw senn::ParameterError("no fractions given");
  return fractions;
}

int run_verb(const std::string& config_path) {
  const auto config = senn::parse_config(config_path);
  const auto result = senn::run(config);
  for (const auto& row : result.metrics) {
    std::printf("epoch %zu: train_loss %.4f train_acc %.4f test_acc %.4f active %zu\n",
                row.epoch, row.train_loss, row.train_accuracy, row.test_accuracy,
                row.active_connections);
  }
  if (!result.metrics_path.empty()) {
    std::printf("metrics: %s\n", result.metrics_path.c_str());
  }
  if (!result.checkpoint_path.empty()) {
    std::printf("checkpoint: %s\n", result.checkpoint_path.c_str());
  }
  if (result.aborted) {
    std::fprintf(stderr, "error: run aborted: %s\n", result.abort_reason.c_str());
    return 1;
  }
  return 0;
}

int compare_verb(const std::vector<std::string>& files, double threshold) {
  const auto report = senn::compare_report(files, threshold);
  std::fputs(report.text().c_str(), stdout);
  return 0;
}

int subsample_verb(const std::string& config_path, const std::string& fractions_text,
                   double threshold) {
  const auto config = senn::parse_config(config_path);
  const auto fractions = parse_fractions(fractions_text);
  const auto report = senn::subsample_experiment(config, fractions, threshold);
  std::fputs(report.text().c_str(), stdout);
  for (const auto& row : report.rows) {
    if (row.aborted) {
      std::fprintf(stderr, "error: a subsample run aborted\n");
      return 1;
    }
  }
  return 0;
}

int inspect_verb(const std::string& checkpoint_path) {
  std::fputs(senn::inspect_checkpoint(checkpoint_path).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-topology MLP training experiments"};
  app.require_subcommand(1);

  std::string run_config;
  auto* run_cmd = app.add_subcommand("run", "Train per a config file");
  run_cmd->add_option("config", run_config, "experiment config file")->required();

  std::vector<std::string> compare_files;
  double compare_threshold = 0.7;
  auto* compare_cmd = app.add_subcommand("compare", "Summarize metric CSVs side by side");
  compare_cmd->add_option("files", compare_files, "metrics.csv files")->expected(-2);
  compare_cmd->add_option("--threshold", compare_threshold,
                          "accuracy for the epochs-to-threshold column");

  std::string subsample_config;
  std::string subsample_fractions;
  double subsample_threshold = 0.7;
  auto* subsample_cmd =
      app.add_subcommand("subsample", "Run a training-set subsample grid");
  subsample_cmd->add_option("config", subsample_config, "experiment config file")
      ->required();
  subsample_cmd->add_option("--fractions", subsample_fractions, "comma list, e.g. 1.0,0.6,0.4")
      ->required();
  subsample_cmd->add_option("--threshold", subsample_threshold,
                            "accuracy for the epochs-to-threshold column");

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "Describe a checkpoint");
  inspect_cmd->add_option("checkpoint", inspect_path, "checkpoint file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return run_verb(run_config);
    if (compare_cmd->parsed()) return compare_verb(compare_files, compare_threshold);
    if (subsample_cmd->parsed()) {
      return subsample_verb(subsample_config, subsample_fractions, subsample_threshold);
    }
    if (inspect_cmd->parsed()) return inspect_verb(inspect_path);
  } catch (const senn::Error& error) {
    std::fprintf(stderr, "error: %s\n", error.what());
    return 1;
  } catch (const std::exception& error) {
    std::fprintf(stderr, "error: %s\n", error.what());
    return 1;
  }
  return 0;
}
