#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "senn/checkpoint.hpp"
#include "senn/config.hpp"
#include "senn/topology.hpp"

using namespace senn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "senn_test_config") {
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string caught_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

bool starts_with(const std::string& text, const std::string& prefix) {
  return text.rfind(prefix, 0) == 0;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& line : lines) {
    text += line;
    text += '\n';
  }
  return text;
}

}  // namespace

TEST_CASE("an empty configuration yields the documented defaults") {
  const ExperimentConfig cfg =
      parse_config_text("# nothing but comments\n\n   \n# and blanks\n", "mem");

  CHECK(cfg.data.source == DatasetSource::synthetic);
  CHECK(cfg.data.csv_train.empty());
  CHECK(cfg.data.csv_test.empty());
  CHECK(cfg.data.idx_train_images.empty());
  CHECK(cfg.data.classes == 3);
  CHECK(cfg.data.dims == 20);
  CHECK(cfg.data.per_class == 1000);
  CHECK(cfg.data.separation == 6.0);
  CHECK(cfg.data.train_fraction == 0.75);

  CHECK(cfg.hidden_layers == std::vector<std::int32_t>{64, 64});
  CHECK(cfg.strategy == Strategy::set);
  CHECK_FALSE(cfg.epsilon.has_value());
  CHECK(cfg.target_mu == 0.1);
  CHECK(cfg.learning_rate == 0.1);
  CHECK(cfg.batch_size == 32);
  CHECK(cfg.epochs == 100);

  CHECK(cfg.evolution.lambda == 0.05);
  CHECK(cfg.evolution.zeta == 0.3);
  CHECK(cfg.evolution.delta == 1.0);
  CHECK(cfg.evolution.lambda_bounds.min == 1e-4);
  CHECK(cfg.evolution.lambda_bounds.max == 0.9);
  CHECK(cfg.evolution.zeta_bounds.min == 1e-4);
  CHECK(cfg.evolution.zeta_bounds.max == 0.9);
  CHECK(cfg.evolution.delta_bounds.min == 0.1);
  CHECK(cfg.evolution.delta_bounds.max == 10.0);
  CHECK_FALSE(cfg.evolution.time_varying);

  CHECK(cfg.controller.k1 == 2.0);
  CHECK(cfg.controller.k2 == 0.5);
  CHECK(cfg.controller.k3 == 0.1);
  CHECK(cfg.controller.k4 == 0.5);

  CHECK(cfg.sensitivity_form == SensitivityForm::paper);
  CHECK(cfg.path_cap == 10000);
  CHECK(cfg.budget_preserving);
  CHECK(cfg.dropout == 0.5);
  CHECK(cfg.seed == 1);
  CHECK(cfg.output_dir == "out");
}

TEST_CASE("every key parses into its field") {
  const std::string text =
      "dataset = csv\n"
      "csv_train = data/train.csv\n"
      "csv_test = data/test.csv\n"
      "classes = 5\n"
      "dims = 7\n"
      "per_class = 11\n"
      "separation = 2.5\n"
      "train_fraction = 0.6\n"
      "hidden_layers = 10, 20,30\n"
      "strategy = path_weight\n"
      "epsilon = 1.5\n"
      "learning_rate = 0.05\n"
      "batch_size = 8\n"
      "epochs = 3   # short run\n"
      "lambda = 0.1\n"
      "zeta = 0.2\n"
      "delta = 1.5\n"
      "lambda_min = 0.001\n"
      "lambda_max = 0.5\n"
      "zeta_min = 0.01\n"
      "zeta_max = 0.8\n"
      "delta_min = 0.2\n"
      "delta_max = 5\n"
      "time_varying = off\n"
      "k1 = 3\n"
      "k2 = 0.25\n"
      "k3 = 0.05\n"
      "k4 = 0.6\n"
      "sensitivity_form = classical\n"
      "path_cap = 500\n"
      "budget_preserving = off\n"
      "dropout = 0.25\n"
      "seed = 42\n"
      "output_dir = results\n";
  const ExperimentConfig cfg = parse_config_text(text, "mem");

  CHECK(cfg.data.source == DatasetSource::csv);
  CHECK(cfg.data.csv_train == "data/train.csv");
  CHECK(cfg.data.csv_test == "data/test.csv");
  CHECK(cfg.data.classes == 5);
  CHECK(cfg.data.dims == 7);
  CHECK(cfg.data.per_class == 11);
  CHECK(cfg.data.separation == 2.5);
  CHECK(cfg.data.train_fraction == 0.6);
  CHECK(cfg.hidden_layers == std::vector<std::int32_t>{10, 20, 30});
  CHECK(cfg.strategy == Strategy::path_weight);
  REQUIRE(cfg.epsilon.has_value());
  CHECK(*cfg.epsilon == 1.5);
  CHECK(cfg.learning_rate == 0.05);
  CHECK(cfg.batch_size == 8);
  CHECK(cfg.epochs == 3);
  CHECK(cfg.evolution.lambda == 0.1);
  CHECK(cfg.evolution.zeta == 0.2);
  CHECK(cfg.evolution.delta == 1.5);
  CHECK(cfg.evolution.lambda_bounds.min == 0.001);
  CHECK(cfg.evolution.lambda_bounds.max == 0.5);
  CHECK(cfg.evolution.zeta_bounds.min == 0.01);
  CHECK(cfg.evolution.zeta_bounds.max == 0.8);
  CHECK(cfg.evolution.delta_bounds.min == 0.2);
  CHECK(cfg.evolution.delta_bounds.max == 5.0);
  CHECK_FALSE(cfg.evolution.time_varying);
  CHECK(cfg.controller.k1 == 3.0);
  CHECK(cfg.controller.k2 == 0.25);
  CHECK(cfg.controller.k3 == 0.05);
  CHECK(cfg.controller.k4 == 0.6);
  CHECK(cfg.sensitivity_form == SensitivityForm::classical);
  CHECK(cfg.path_cap == 500);
  CHECK_FALSE(cfg.budget_preserving);
  CHECK(cfg.dropout == 0.25);
  CHECK(cfg.seed == 42);
  CHECK(cfg.output_dir == "results");
}

TEST_CASE("boolean flags accept on, off, true, false, 1 and 0") {
  for (const char* value : {"on", "true", "1"}) {
    const auto cfg = parse_config_text(std::string("time_varying = ") + value, "mem");
    CHECK(cfg.evolution.time_varying);
  }
  for (const char* value : {"off", "false", "0"}) {
    const auto cfg = parse_config_text(std::string("time_varying = ") + value, "mem");
    CHECK_FALSE(cfg.evolution.time_varying);
  }
  CHECK_THROWS_AS(parse_config_text("time_varying = yes", "mem"), FormatError);
  CHECK_THROWS_AS(parse_config_text("budget_preserving = maybe", "mem"), FormatError);
}

TEST_CASE("time-varying mode swaps in larger defaults unless overridden") {
  const auto swapped = parse_config_text("time_varying = on", "mem");
  CHECK(swapped.evolution.lambda == 0.2);
  CHECK(swapped.evolution.zeta == 0.5);
  CHECK(swapped.evolution.delta == 2.0);

  const auto mixed = parse_config_text("time_varying = on\nzeta = 0.25", "mem");
  CHECK(mixed.evolution.lambda == 0.2);
  CHECK(mixed.evolution.zeta == 0.25);
  CHECK(mixed.evolution.delta == 2.0);

  const auto off = parse_config_text("time_varying = off", "mem");
  CHECK(off.evolution.lambda == 0.05);
  CHECK(off.evolution.zeta == 0.3);
  CHECK(off.evolution.delta == 1.0);
}

TEST_CASE("parse errors carry the origin and line number") {
  SUBCASE("missing equals sign") {
    const auto msg = caught_message([] { parse_config_text("seed = 1\njust words", "cfg"); });
    CHECK(starts_with(msg, "cfg:2: "));
    CHECK(msg.find("expected key = value") != std::string::npos);
    CHECK_THROWS_AS(parse_config_text("just words", "cfg"), FormatError);
  }
  SUBCASE("missing key") {
    const auto msg = caught_message([] { parse_config_text("= 5", "cfg"); });
    CHECK(msg == "cfg:1: missing key");
  }
  SUBCASE("missing value") {
    const auto msg = caught_message([] { parse_config_text("seed =", "cfg"); });
    CHECK(msg == "cfg:1: missing value for 'seed'");
  }
  SUBCASE("duplicate key") {
    const auto msg = caught_message([] { parse_config_text("seed = 1\nseed = 2", "cfg"); });
    CHECK(msg == "cfg:2: duplicate key 'seed'");
    CHECK_THROWS_AS(parse_config_text("seed = 1\nseed = 1", "cfg"), FormatError);
  }
  SUBCASE("unknown key") {
    const auto msg = caught_message([] { parse_config_text("learning = 0.1", "cfg"); });
    CHECK(msg == "cfg:1: unknown key 'learning'");
  }
  SUBCASE("type mismatches are format errors") {
    CHECK_THROWS_AS(parse_config_text("epochs = many", "cfg"), FormatError);
    CHECK_THROWS_AS(parse_config_text("learning_rate = fast", "cfg"), FormatError);
    CHECK_THROWS_AS(parse_config_text("seed = -3", "cfg"), FormatError);
    CHECK_THROWS_AS(parse_config_text("strategy = magic", "cfg"), FormatError);
    CHECK_THROWS_AS(parse_config_text("dataset = web", "cfg"), FormatError);
    CHECK_THROWS_AS(parse_config_text("sensitivity_form = both", "cfg"), FormatError);
    CHECK_THROWS_AS(parse_config_text("hidden_layers = 10,,20", "cfg"), FormatError);
    CHECK_THROWS_AS(parse_config_text("hidden_layers = 0", "cfg"), FormatError);
    const auto msg = caught_message([] { parse_config_text("epochs = many", "cfg"); });
    CHECK(msg == "cfg:1: epochs expects an integer");
  }
  SUBCASE("range violations are parameter errors") {
    CHECK_THROWS_AS(parse_config_text("dropout = 1.0", "cfg"), ParameterError);
    CHECK_THROWS_AS(parse_config_text("zeta = 0", "cfg"), ParameterError);
    CHECK_THROWS_AS(parse_config_text("lambda = 1", "cfg"), ParameterError);
    CHECK_THROWS_AS(parse_config_text("train_fraction = 1", "cfg"), ParameterError);
    CHECK_THROWS_AS(parse_config_text("batch_size = 0", "cfg"), ParameterError);
    CHECK_THROWS_AS(parse_config_text("epsilon = 0", "cfg"), ParameterError);
    CHECK_THROWS_AS(parse_config_text("target_mu = 1.5", "cfg"), ParameterError);
    const auto msg = caught_message([] { parse_config_text("seed = 1\ndropout = 1.0", "cfg"); });
    CHECK(msg == "cfg:2: dropout = 1.0 is out of range");
  }
  SUBCASE("boundary values that are legal parse cleanly") {
    CHECK(parse_config_text("dropout = 0", "mem").dropout == 0.0);
    CHECK(parse_config_text("target_mu = 1", "mem").target_mu == 1.0);
    CHECK(parse_config_text("separation = 0", "mem").data.separation == 0.0);
    CHECK(parse_config_text("seed = 0", "mem").seed == 0);
  }
}

TEST_CASE("epsilon and target_mu cannot both be given") {
  const auto msg = caught_message(
      [] { parse_config_text("epsilon = 2\ntarget_mu = 0.3", "cfg"); });
  CHECK(msg == "cfg: epsilon and target_mu are mutually exclusive");
  CHECK_THROWS_AS(parse_config_text("target_mu = 0.3\nepsilon = 2", "cfg"), FormatError);
  CHECK_NOTHROW(parse_config_text("epsilon = 2", "cfg"));
  CHECK_NOTHROW(parse_config_text("target_mu = 0.3", "cfg"));
}

TEST_CASE("cross-field validation catches inconsistent sources") {
  SUBCASE("csv requires a training file") {
    CHECK_THROWS_AS(parse_config_text("dataset = csv", "cfg"), ParameterError);
    CHECK_NOTHROW(parse_config_text("dataset = csv\ncsv_train = t.csv", "cfg"));
  }
  SUBCASE("idx requires the training pair") {
    CHECK_THROWS_AS(parse_config_text("dataset = idx\nidx_train_images = i", "cfg"),
                    ParameterError);
    CHECK_NOTHROW(parse_config_text(
        "dataset = idx\nidx_train_images = i\nidx_train_labels = l", "cfg"));
  }
  SUBCASE("idx test files come in pairs") {
    CHECK_THROWS_AS(
        parse_config_text("dataset = idx\nidx_train_images = i\nidx_train_labels = l\n"
                          "idx_test_images = ti",
                          "cfg"),
        ParameterError);
    CHECK_NOTHROW(
        parse_config_text("dataset = idx\nidx_train_images = i\nidx_train_labels = l\n"
                          "idx_test_images = ti\nidx_test_labels = tl",
                          "cfg"));
  }
  SUBCASE("paths for the wrong source are rejected") {
    CHECK_THROWS_AS(parse_config_text("csv_train = t.csv", "cfg"), ParameterError);
    CHECK_THROWS_AS(parse_config_text("dataset = csv\ncsv_train = t\nidx_test_images = x", "cfg"),
                    ParameterError);
  }
  SUBCASE("direct validation checks ranges the parser cannot see") {
    ExperimentConfig cfg;
    cfg.epsilon = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = ExperimentConfig{};
    cfg.hidden_layers = {16, 0};
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = ExperimentConfig{};
    cfg.dropout = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = ExperimentConfig{};
    cfg.evolution.zeta = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = ExperimentConfig{};
    cfg.controller.k2 = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    CHECK_NOTHROW(ExperimentConfig{}.validate());
  }
}

TEST_CASE("a configuration file parses like its text") {
  TempDir dir;
  const auto path = dir.path / "run.cfg";
  write_text(path, "strategy = sensitivity\nepochs = 7\n");
  const ExperimentConfig cfg = parse_config(path.string());
  CHECK(cfg.strategy == Strategy::sensitivity);
  CHECK(cfg.epochs == 7);

  CHECK_THROWS_AS(parse_config((dir.path / "absent.cfg").string()), InputError);
  const auto msg =
      caught_message([&] { write_text(path, "epochs = 0\n"); parse_config(path.string()); });
  CHECK(starts_with(msg, path.string() + ":1: "));
}

TEST_CASE("doubles round-trip through their hex bit patterns") {
  CHECK(double_to_hex(0.0) == "0000000000000000");
  CHECK(double_to_hex(-0.0) == "8000000000000000");
  CHECK(double_to_hex(1.0) == "3ff0000000000000");
  CHECK(double_to_hex(-0.5) == "bfe0000000000000");
  CHECK(double_to_hex(std::numeric_limits<double>::infinity()) == "7ff0000000000000");
  CHECK(double_to_hex(-std::numeric_limits<double>::infinity()) == "fff0000000000000");

  const double values[] = {0.1,
                           -2.5,
                           1.0 / 3.0,
                           6.02214076e23,
                           std::numeric_limits<double>::denorm_min(),
                           -std::numeric_limits<double>::max(),
                           std::numeric_limits<double>::epsilon()};
  for (double v : values) {
    const std::string hex = double_to_hex(v);
    CHECK(hex.size() == 16);
    const double back = hex_to_double(hex);
    CHECK(back == v);
    CHECK(std::signbit(back) == std::signbit(v));
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double back = hex_to_double(double_to_hex(nan));
  CHECK(std::isnan(back));
  CHECK(double_to_hex(back) == double_to_hex(nan));

  CHECK(hex_to_double("3FF0000000000000") == 1.0);
  CHECK_THROWS_AS(hex_to_double(""), FormatError);
  CHECK_THROWS_AS(hex_to_double("3ff000000000000"), FormatError);
  CHECK_THROWS_AS(hex_to_double("3ff00000000000000"), FormatError);
  CHECK_THROWS_AS(hex_to_double("zz00000000000000"), FormatError);
  CHECK_THROWS_AS(hex_to_double("3ff000000000000g"), FormatError);
}

TEST_CASE("a checkpoint restores the exact network") {
  TempDir dir;
  const auto path = (dir.path / "net.ckpt").string();

  SparseNetwork net = erdos_renyi_init({5, 9, 4}, 1.3, 77);
  for (int l = 0; l < net.weight_layer_count(); ++l) {
    auto weights = net.weights(l);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      weights[i] = std::sin(static_cast<double>(i + 1) * 0.7 + l) * 3.14159;
    }
    auto bias = net.bias(l);
    for (std::size_t i = 0; i < bias.size(); ++i) {
      bias[i] = std::cos(static_cast<double>(i) * 1.3 - l) / 7.0;
    }
  }
  net.set_budget(net.active_count() + 3);
  net.set_epsilon(1.3);

  save_checkpoint(net, path);
  const SparseNetwork loaded = load_checkpoint(path);

  CHECK(loaded.layer_sizes() == net.layer_sizes());
  CHECK(loaded.budget() == net.budget());
  CHECK(double_to_hex(loaded.mask().epsilon) == double_to_hex(net.mask().epsilon));
  CHECK(loaded.active_count() == net.active_count());
  for (int l = 0; l < net.weight_layer_count(); ++l) {
    const auto lw = loaded.weights(l);
    const auto nw = net.weights(l);
    REQUIRE(loaded.mask().layers[l] == net.mask().layers[l]);
    REQUIRE(lw.size() == nw.size());
    for (std::size_t i = 0; i < nw.size(); ++i) {
      CHECK(double_to_hex(lw[i]) == double_to_hex(nw[i]));
    }
    const auto lb = loaded.bias(l);
    const auto nb = net.bias(l);
    REQUIRE(lb.size() == nb.size());
    for (std::size_t i = 0; i < nb.size(); ++i) {
      CHECK(double_to_hex(lb[i]) == double_to_hex(nb[i]));
    }
  }

  save_checkpoint(loaded, path + ".again");
  CHECK(read_text(path) == read_text(path + ".again"));
}

TEST_CASE("the checkpoint layout is line-oriented and sparse") {
  TempDir dir;
  const auto path = (dir.path / "tiny.ckpt").string();
  const SparseNetwork net = SparseNetwork::from_connections(
      {2, 2, 2}, {{{0, 0, 1}, 1.0}, {{1, 1, 0}, -0.5}});
  save_checkpoint(net, path);

  const std::string expected =
      "senn-checkpoint v1\n"
      "layers 3 2 2 2\n"
      "budget 2\n"
      "epsilon 0000000000000000\n"
      "connections 2\n"
      "0 0 1 3ff0000000000000\n"
      "1 1 0 bfe0000000000000\n"
      "biases 4\n"
      "0 0 0000000000000000\n"
      "0 1 0000000000000000\n"
      "1 0 0000000000000000\n"
      "1 1 0000000000000000\n";
  CHECK(read_text(path) == expected);
}

TEST_CASE("loading rejects malformed checkpoints") {
  TempDir dir;
  const auto path = (dir.path / "bad.ckpt").string();
  const std::vector<std::string> base = {
      "senn-checkpoint v1", "layers 3 2 2 2",       "budget 2",
      "epsilon 0000000000000000", "connections 2",  "0 0 1 3ff0000000000000",
      "1 1 0 bfe0000000000000",   "biases 4",       "0 0 0000000000000000",
      "0 1 0000000000000000",     "1 0 0000000000000000", "1 1 0000000000000000"};
  const auto expect = [&](const std::vector<std::string>& lines, const std::string& needle) {
    write_text(path, join_lines(lines));
    const auto msg = caught_message([&] { load_checkpoint(path); });
    CHECK(msg.find(needle) != std::string::npos);
    CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  };

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint((dir.path / "absent.ckpt").string()), InputError);
  }
  SUBCASE("round trip of the base fixture works") {
    write_text(path, join_lines(base));
    CHECK_NOTHROW(load_checkpoint(path));
  }
  SUBCASE("wrong version line") {
    auto lines = base;
    lines[0] = "senn-checkpoint v2";
    expect(lines, ":1: unsupported checkpoint version");
  }
  SUBCASE("truncated after the header") { expect({base[0]}, "missing"); }
  SUBCASE("too few layers") {
    auto lines = base;
    lines[1] = "layers 1 5";
    expect(lines, "expected 'layers");
  }
  SUBCASE("non-positive layer size") {
    auto lines = base;
    lines[1] = "layers 3 2 0 2";
    expect(lines, "bad layer size");
  }
  SUBCASE("bad budget line") {
    auto lines = base;
    lines[2] = "budget much";
    expect(lines, "expected 'budget <count>'");
  }
  SUBCASE("bad epsilon hex") {
    auto lines = base;
    lines[3] = "epsilon 3ff";
    expect(lines, "expected 16 hex digits");
  }
  SUBCASE("connection count larger than the lines present") {
    auto lines = base;
    lines[4] = "connections 3";
    expect(lines, "expected 'layer source target weight'");
  }
  SUBCASE("duplicate connection coordinates") {
    auto lines = base;
    lines[6] = "0 0 1 bfe0000000000000";
    expect(lines, path + ": ");
  }
  SUBCASE("connection out of range") {
    auto lines = base;
    lines[6] = "1 1 5 bfe0000000000000";
    expect(lines, path + ": ");
  }
  SUBCASE("budget below the connection count") {
    auto lines = base;
    lines[2] = "budget 1";
    expect(lines, "budget smaller than the connection count");
  }
  SUBCASE("bias count that contradicts the layer sizes") {
    auto lines = base;
    lines[7] = "biases 3";
    expect(lines, "bias count does not match the layer sizes");
  }
  SUBCASE("bias coordinate out of range") {
    auto lines = base;
    lines[8] = "0 7 0000000000000000";
    expect(lines, "bias coordinate out of range");
  }
  SUBCASE("truncated bias section") {
    auto lines = base;
    lines.pop_back();
    expect(lines, "missing bias line");
  }
}

TEST_CASE("inspection summarizes the stored topology") {
  TempDir dir;
  const auto path = (dir.path / "inspect.ckpt").string();
  SparseNetwork net = erdos_renyi_init({5, 9, 4}, 1.3, 77);
  net.set_epsilon(1.3);
  save_checkpoint(net, path);

  const std::string text = inspect_checkpoint(path);
  CHECK(text.find("layers: 5 -> 9 -> 4") != std::string::npos);
  CHECK(text.find("active connections: " + std::to_string(net.active_count()) + " / 81") !=
        std::string::npos);
  CHECK(text.find("budget: " + std::to_string(net.budget())) != std::string::npos);
  CHECK(text.find("epsilon: 1.3") != std::string::npos);
  CHECK(text.find("layer 0: ") != std::string::npos);
  CHECK(text.find("layer 1: ") != std::string::npos);
}
