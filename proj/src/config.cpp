#include "senn/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace senn {

namespace {

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = text.find_last_not_of(" \t\r");
  return text.substr(first, last - first + 1);
}

bool to_double(const std::string& text, double& out) {
  const char* begin = text.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end != begin && *end == '\0';
}

bool to_int64(const std::string& text, long long& out) {
  const char* begin = text.c_str();
  char* end = nullptr;
  out = std::strtoll(begin, &end, 10);
  return end != begin && *end == '\0';
}

bool to_uint64(const std::string& text, unsigned long long& out) {
  if (text.empty() || text[0] == '-') return false;
  const char* begin = text.c_str();
  char* end = nullptr;
  out = std::strtoull(begin, &end, 10);
  return end != begin && *end == '\0';
}

struct Position {
  const std::string& origin;
  std::size_t line;

  std::string str() const { return origin + ":" + std::to_string(line); }
};

[[noreturn]] void bad_format(const Position& where, const std::string& message) {
  throw FormatError(where.str() + ": " + message);
}

[[noreturn]] void bad_range(const Position& where, const std::string& message) {
  throw ParameterError(where.str() + ": " + message);
}

double parse_real(const std::string& value, const Position& where, const char* key) {
  double out = 0.0;
  if (!to_double(value, out)) bad_format(where, std::string(key) + " expects a number");
  return out;
}

long long parse_integer(const std::string& value, const Position& where, const char* key) {
  long long out = 0;
  if (!to_int64(value, out)) bad_format(where, std::string(key) + " expects an integer");
  return out;
}

bool parse_flag(const std::string& value, const Position& where, const char* key) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  bad_format(where, std::string(key) + " expects on/off");
}

std::vector<std::int32_t> parse_size_list(const std::string& value, const Position& where,
                                          const char* key) {
  std::vector<std::int32_t> sizes;
  std::stringstream stream(value);
  std::string piece;
  while (std::getline(stream, piece, ',')) {
    piece = trim(piece);
    long long n = 0;
    if (!to_int64(piece, n) || n < 1) {
      bad_format(where, std::string(key) + " expects comma-separated positive integers");
    }
    sizes.push_back(static_cast<std::int32_t>(n));
  }
  if (sizes.empty()) bad_format(where, std::string(key) + " is empty");
  return sizes;
}

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value,
               const Position& where) {
  const auto real_in = [&](double lo, double hi, bool lo_open, bool hi_open) {
    const double v = parse_real(value, where, key.c_str());
    const bool below = lo_open ? !(v > lo) : !(v >= lo);
    const bool above = hi_open ? !(v < hi) : !(v <= hi);
    if (below || above) bad_range(where, key + " = " + value + " is out of range");
    return v;
  };
  const auto positive_int = [&]() {
    const long long v = parse_integer(value, where, key.c_str());
    if (v < 1) bad_range(where, key + " must be positive");
    return v;
  };

  if (key == "dataset") {
    if (value == "synthetic") cfg.data.source = DatasetSource::synthetic;
    else if (value == "csv") cfg.data.source = DatasetSource::csv;
    else if (value == "idx") cfg.data.source = DatasetSource::idx;
    else bad_format(where, "dataset expects synthetic, csv or idx");
  } else if (key == "csv_train") {
    cfg.data.csv_train = value;
  } else if (key == "csv_test") {
    cfg.data.csv_test = value;
  } else if (key == "idx_train_images") {
    cfg.data.idx_train_images = value;
  } else if (key == "idx_train_labels") {
    cfg.data.idx_train_labels = value;
  } else if (key == "idx_test_images") {
    cfg.data.idx_test_images = value;
  } else if (key == "idx_test_labels") {
    cfg.data.idx_test_labels = value;
  } else if (key == "classes") {
    cfg.data.classes = static_cast<std::int32_t>(positive_int());
  } else if (key == "dims") {
    cfg.data.dims = static_cast<std::int32_t>(positive_int());
  } else if (key == "per_class") {
    cfg.data.per_class = static_cast<std::int32_t>(positive_int());
  } else if (key == "separation") {
    cfg.data.separation = real_in(0.0, 1e18, false, false);
  } else if (key == "train_fraction") {
    cfg.data.train_fraction = real_in(0.0, 1.0, true, true);
  } else if (key == "hidden_layers") {
    cfg.hidden_layers = parse_size_list(value, where, "hidden_layers");
  } else if (key == "strategy") {
    try {
      cfg.strategy = parse_strategy(value);
    } catch (const ParameterError&) {
      bad_format(where, "strategy expects dense, set, path_weight or sensitivity");
    }
  } else if (key == "epsilon") {
    cfg.epsilon = real_in(0.0, 1e18, true, false);
  } else if (key == "target_mu") {
    cfg.target_mu = real_in(0.0, 1.0, true, false);
  } else if (key == "learning_rate") {
    cfg.learning_rate = real_in(0.0, 1e18, true, false);
  } else if (key == "batch_size") {
    cfg.batch_size = static_cast<std::size_t>(positive_int());
  } else if (key == "epochs") {
    cfg.epochs = static_cast<std::size_t>(positive_int());
  } else if (key == "lambda") {
    cfg.evolution.lambda = real_in(0.0, 1.0, true, true);
  } else if (key == "zeta") {
    cfg.evolution.zeta = real_in(0.0, 1.0, true, true);
  } else if (key == "delta") {
    cfg.evolution.delta = real_in(0.0, 1e18, true, false);
  } else if (key == "lambda_min") {
    cfg.evolution.lambda_bounds.min = real_in(0.0, 1e18, true, false);
  } else if (key == "lambda_max") {
    cfg.evolution.lambda_bounds.max = real_in(0.0, 1e18, true, false);
  } else if (key == "zeta_min") {
    cfg.evolution.zeta_bounds.min = real_in(0.0, 1e18, true, false);
  } else if (key == "zeta_max") {
    cfg.evolution.zeta_bounds.max = real_in(0.0, 1e18, true, false);
  } else if (key == "delta_min") {
    cfg.evolution.delta_bounds.min = real_in(0.0, 1e18, true, false);
  } else if (key == "delta_max") {
    cfg.evolution.delta_bounds.max = real_in(0.0, 1e18, true, false);
  } else if (key == "time_varying") {
    cfg.evolution.time_varying = parse_flag(value, where, "time_varying");
  } else if (key == "k1") {
    cfg.controller.k1 = parse_real(value, where, "k1");
  } else if (key == "k2") {
    cfg.controller.k2 = parse_real(value, where, "k2");
  } else if (key == "k3") {
    cfg.controller.k3 = parse_real(value, where, "k3");
  } else if (key == "k4") {
    cfg.controller.k4 = parse_real(value, where, "k4");
  } else if (key == "sensitivity_form") {
    if (value == "paper") cfg.sensitivity_form = SensitivityForm::paper;
    else if (value == "classical") cfg.sensitivity_form = SensitivityForm::classical;
    else bad_format(where, "sensitivity_form expects paper or classical");
  } else if (key == "path_cap") {
    cfg.path_cap = static_cast<std::size_t>(positive_int());
  } else if (key == "budget_preserving") {
    cfg.budget_preserving = parse_flag(value, where, "budget_preserving");
  } else if (key == "dropout") {
    cfg.dropout = real_in(0.0, 1.0, false, true);
  } else if (key == "seed") {
    unsigned long long v = 0;
    if (!to_uint64(value, v)) bad_format(where, "seed expects a non-negative integer");
    cfg.seed = v;
  } else if (key == "output_dir") {
    cfg.output_dir = value;
  } else {
    bad_format(where, "unknown key '" + key + "'");
  }
}

}  // namespace

std::string dataset_source_name(DatasetSource source) {
  switch (source) {
    case DatasetSource::synthetic: return "synthetic";
    case DatasetSource::csv: return "csv";
    case DatasetSource::idx: return "idx";
  }
  throw ParameterError("unknown dataset source");
}

void ExperimentConfig::validate() const {
  for (std::int32_t n : hidden_layers) {
    if (n < 1) throw ParameterError("hidden layer sizes must be positive");
  }
  if (data.classes < 1 || data.dims < 1 || data.per_class < 1) {
    throw ParameterError("synthetic dataset parameters must be positive");
  }
  if (!(data.separation >= 0.0)) throw ParameterError("separation must be non-negative");
  if (!(data.train_fraction > 0.0) || !(data.train_fraction < 1.0)) {
    throw ParameterError("train_fraction must lie in (0, 1)");
  }
  if (data.source == DatasetSource::csv && data.csv_train.empty()) {
    throw ParameterError("dataset = csv requires csv_train");
  }
  if (data.source == DatasetSource::idx) {
    if (data.idx_train_images.empty() || data.idx_train_labels.empty()) {
      throw ParameterError("dataset = idx requires idx_train_images and idx_train_labels");
    }
    if (data.idx_test_images.empty() != data.idx_test_labels.empty()) {
      throw ParameterError("idx test images and labels must be given together");
    }
  }
  if (data.source != DatasetSource::csv && (!data.csv_train.empty() || !data.csv_test.empty())) {
    throw ParameterError("csv paths require dataset = csv");
  }
  if (data.source != DatasetSource::idx &&
      (!data.idx_train_images.empty() || !data.idx_train_labels.empty() ||
       !data.idx_test_images.empty() || !data.idx_test_labels.empty())) {
    throw ParameterError("idx paths require dataset = idx");
  }
  if (epsilon.has_value() && !(*epsilon > 0.0)) {
    throw ParameterError("epsilon must be positive");
  }
  if (!(target_mu > 0.0) || target_mu > 1.0) {
    throw ParameterError("target_mu must lie in (0, 1]");
  }
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
  if (batch_size < 1) throw ParameterError("batch_size must be positive");
  if (epochs < 1) throw ParameterError("epochs must be positive");
  if (!(dropout >= 0.0) || dropout >= 1.0) {
    throw ParameterError("dropout must lie in [0, 1)");
  }
  if (path_cap < 1) throw ParameterError("path_cap must be positive");
  evolution.validate();
  controller.validate();
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::stringstream stream(text);
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(stream, line)) {
    ++line_number;
    const Position where{origin, line_number};
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto equals = line.find('=');
    if (equals == std::string::npos) bad_format(where, "expected key = value");
    const std::string key = trim(line.substr(0, equals));
    const std::string value = trim(line.substr(equals + 1));
    if (key.empty()) bad_format(where, "missing key");
    if (value.empty()) bad_format(where, "missing value for '" + key + "'");
    if (!seen.insert(key).second) bad_format(where, "duplicate key '" + key + "'");
    apply_key(cfg, key, value, where);
  }

  if (seen.count("epsilon") && seen.count("target_mu")) {
    throw FormatError(origin + ": epsilon and target_mu are mutually exclusive");
  }
  if (cfg.evolution.time_varying) {
    const auto tv = initial_params(ParamMode::time_varying);
    if (!seen.count("lambda")) cfg.evolution.lambda = tv.lambda;
    if (!seen.count("zeta")) cfg.evolution.zeta = tv.zeta;
    if (!seen.count("delta")) cfg.evolution.delta = tv.delta;
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

}  // namespace senn
