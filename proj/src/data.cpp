#include "senn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

#include "senn/rng.hpp"

namespace senn {

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) throw InputError(path + ": truncated header");
  return (static_cast<std::uint32_t>(bytes[0]) << 24) |
         (static_cast<std::uint32_t>(bytes[1]) << 16) |
         (static_cast<std::uint32_t>(bytes[2]) << 8) | bytes[3];
}

bool parse_double(const std::string& text, double& out) {
  const char* begin = text.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  return *end == '\0';
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::int32_t infer_class_count(const std::vector<std::int32_t>& labels,
                               const std::string& origin) {
  std::int32_t top = -1;
  for (std::int32_t label : labels) {
    if (label < 0) throw FormatError(origin + ": negative label");
    top = std::max(top, label);
  }
  return top + 1;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream images(images_path, std::ios::binary);
  if (!images) throw InputError("cannot open " + images_path);
  if (read_be32(images, images_path) != 0x00000803u) {
    throw FormatError(images_path + ": bad image magic");
  }
  const std::uint32_t count = read_be32(images, images_path);
  const std::uint32_t rows = read_be32(images, images_path);
  const std::uint32_t cols = read_be32(images, images_path);
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  if (pixels == 0) throw FormatError(images_path + ": zero image dimensions");

  Dataset dataset;
  dataset.features = Matrix(count, pixels);
  std::vector<unsigned char> buffer(pixels);
  for (std::uint32_t i = 0; i < count; ++i) {
    images.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(pixels));
    if (!images) throw InputError(images_path + ": truncated image data");
    for (std::size_t j = 0; j < pixels; ++j) {
      dataset.features(i, j) = static_cast<double>(buffer[j]) / 255.0;
    }
  }

  std::ifstream labels(labels_path, std::ios::binary);
  if (!labels) throw InputError("cannot open " + labels_path);
  if (read_be32(labels, labels_path) != 0x00000801u) {
    throw FormatError(labels_path + ": bad label magic");
  }
  const std::uint32_t label_count = read_be32(labels, labels_path);
  if (label_count != count) {
    throw ConsistencyError(labels_path + ": label count does not match image count");
  }
  dataset.labels.resize(label_count);
  for (std::uint32_t i = 0; i < label_count; ++i) {
    unsigned char byte = 0;
    labels.read(reinterpret_cast<char*>(&byte), 1);
    if (!labels) throw InputError(labels_path + ": truncated label data");
    dataset.labels[i] = byte;
  }
  dataset.class_count = infer_class_count(dataset.labels, labels_path);
  return dataset;
}

Dataset load_csv(const std::string& path, std::int32_t label_column) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t width = 0;
  bool first = true;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (!parse_double(fields[i], row[i])) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;  // header row
        continue;
      }
      throw FormatError(path + ": non-numeric value on line " + std::to_string(line_number));
    }
    first = false;
    if (width == 0) {
      width = row.size();
      if (width < 2) throw FormatError(path + ": rows need a feature and a label");
    } else if (row.size() != width) {
      throw FormatError(path + ": ragged row on line " + std::to_string(line_number));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError(path + ": no data rows");

  const std::int32_t label_index =
      label_column < 0 ? static_cast<std::int32_t>(width) - 1 : label_column;
  if (label_index < 0 || static_cast<std::size_t>(label_index) >= width) {
    throw ParameterError("label column out of range");
  }

  Dataset dataset;
  dataset.features = Matrix(rows.size(), width - 1);
  dataset.labels.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double raw = rows[r][static_cast<std::size_t>(label_index)];
    const double rounded = std::nearbyint(raw);
    if (std::abs(raw - rounded) > 1e-9 || rounded < 0) {
      throw FormatError(path + ": label on row " + std::to_string(r + 1) +
                        " is not a non-negative integer");
    }
    dataset.labels[r] = static_cast<std::int32_t>(rounded);
    std::size_t out = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (c == static_cast<std::size_t>(label_index)) continue;
      dataset.features(r, out++) = rows[r][c];
    }
  }
  dataset.class_count = infer_class_count(dataset.labels, path);
  return dataset;
}

void save_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path + " for writing");
  char buffer[64];
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    for (std::size_t c = 0; c < dataset.feature_count(); ++c) {
      std::snprintf(buffer, sizeof buffer, "%.17g", dataset.features(r, c));
      out << buffer << ',';
    }
    out << dataset.labels[r] << '\n';
  }
  if (!out) throw InputError("failed writing " + path);
}

Dataset synthetic_gaussians(std::int32_t classes, std::int32_t dims,
                            std::int32_t per_class, double separation,
                            std::uint64_t seed) {
  if (classes < 1) throw ParameterError("synthetic data needs at least 1 class");
  if (per_class < 1) throw ParameterError("per-class count must be positive");
  return synthetic_gaussians(
      dims, std::vector<std::int32_t>(static_cast<std::size_t>(classes), per_class),
      separation, seed);
}

Dataset synthetic_gaussians(std::int32_t dims, const std::vector<std::int32_t>& per_class,
                            double separation, std::uint64_t seed) {
  if (dims < 1) throw ParameterError("synthetic data needs at least 1 dimension");
  if (per_class.empty()) throw ParameterError("synthetic data needs at least 1 class");
  if (!(separation >= 0.0)) throw ParameterError("separation must be non-negative");
  std::size_t total = 0;
  for (std::int32_t n : per_class) {
    if (n < 1) throw ParameterError("per-class count must be positive");
    total += static_cast<std::size_t>(n);
  }

  const auto classes = static_cast<std::int32_t>(per_class.size());
  Dataset dataset;
  dataset.class_count = classes;
  dataset.features = Matrix(total, static_cast<std::size_t>(dims));
  dataset.labels.resize(total);

  Rng rng(seed);
  std::vector<std::vector<double>> centers(static_cast<std::size_t>(classes));
  for (auto& center : centers) {
    center.resize(static_cast<std::size_t>(dims));
    double norm = 0.0;
    while (norm == 0.0) {
      for (double& v : center) v = rng.normal();
      for (double v : center) norm += v * v;
      norm = std::sqrt(norm);
    }
    for (double& v : center) v = separation * v / norm;
  }

  std::size_t row = 0;
  for (std::int32_t c = 0; c < classes; ++c) {
    for (std::int32_t i = 0; i < per_class[static_cast<std::size_t>(c)]; ++i, ++row) {
      dataset.labels[row] = c;
      for (std::int32_t d = 0; d < dims; ++d) {
        dataset.features(row, static_cast<std::size_t>(d)) =
            centers[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] + rng.normal();
      }
    }
  }
  return dataset;
}

void normalize(Dataset& train, std::vector<Dataset*> others) {
  if (train.size() == 0) throw InputError("cannot normalize an empty dataset");
  const std::size_t d = train.feature_count();
  FeatureStats stats;
  stats.mean.assign(d, 0.0);
  stats.scale.assign(d, 0.0);
  const auto n = static_cast<double>(train.size());

  for (std::size_t j = 0; j < d; ++j) {
    double lo = train.features(0, j);
    double hi = lo;
    double sum = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const double v = train.features(i, j);
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double mean = sum / n;
    stats.mean[j] = mean;
    if (lo == hi) {
      stats.scale[j] = 0.0;  // constant feature
      continue;
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const double delta = train.features(i, j) - mean;
      sq += delta * delta;
    }
    stats.scale[j] = std::sqrt(sq / n);
  }

  const auto apply = [&](Dataset& dataset) {
    if (dataset.feature_count() != d) {
      throw ConsistencyError("normalization width does not match the training split");
    }
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        dataset.features(i, j) =
            stats.scale[j] == 0.0
                ? 0.0
                : (dataset.features(i, j) - stats.mean[j]) / stats.scale[j];
      }
    }
    dataset.stats = stats;
  };
  apply(train);
  for (Dataset* other : others) {
    if (other != nullptr) apply(*other);
  }
}

std::vector<std::vector<std::int32_t>> batches(std::size_t n, std::size_t batch_size,
                                               std::uint64_t shuffle_seed,
                                               std::uint64_t epoch_index) {
  if (batch_size == 0) throw ParameterError("batch size must be positive");
  std::vector<std::int32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::int32_t>(i);
  Rng rng(derive_seed(shuffle_seed, epoch_index));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::int32_t>> plan;
  plan.reserve((n + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    plan.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                      order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return plan;
}

std::pair<Matrix, std::vector<std::int32_t>> gather(const Dataset& dataset,
                                                    const std::vector<std::int32_t>& indices) {
  Matrix features(indices.size(), dataset.feature_count());
  std::vector<std::int32_t> labels(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::int32_t row = indices[i];
    if (row < 0 || static_cast<std::size_t>(row) >= dataset.size()) {
      throw ConsistencyError("gather index out of range");
    }
    for (std::size_t j = 0; j < dataset.feature_count(); ++j) {
      features(i, j) = dataset.features(static_cast<std::size_t>(row), j);
    }
    labels[i] = dataset.labels[static_cast<std::size_t>(row)];
  }
  return {std::move(features), std::move(labels)};
}

namespace {

// Seeded per-class row selections; each class's picks are returned sorted so
// the original row order survives.
std::vector<std::vector<std::int32_t>> per_class_rows(const Dataset& dataset) {
  std::vector<std::vector<std::int32_t>> by_class(
      static_cast<std::size_t>(dataset.class_count));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(
        static_cast<std::int32_t>(i));
  }
  return by_class;
}

std::vector<bool> stratified_pick(const Dataset& dataset, double fraction,
                                  std::uint64_t seed, bool round_to_nearest,
                                  const char* context) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw ParameterError(std::string(context) + " fraction must lie in (0, 1]");
  }
  const auto by_class = per_class_rows(dataset);
  std::vector<bool> picked(dataset.size(), false);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const auto& rows = by_class[c];
    if (rows.empty()) {
      throw ConsistencyError(std::string(context) + ": class " + std::to_string(c) +
                             " has no rows");
    }
    const double exact = fraction * static_cast<double>(rows.size());
    auto keep = static_cast<std::size_t>(round_to_nearest ? std::llround(exact)
                                                          : std::ceil(exact));
    keep = std::min(keep, rows.size());
    if (keep == 0) {
      throw ConsistencyError(std::string(context) + ": class " + std::to_string(c) +
                             " would vanish");
    }
    std::vector<std::int32_t> pool = rows;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    for (std::size_t i = pool.size(); i > 1; --i) {
      const std::size_t j = rng.uniform_index(i);
      std::swap(pool[i - 1], pool[j]);
    }
    for (std::size_t i = 0; i < keep; ++i) {
      picked[static_cast<std::size_t>(pool[i])] = true;
    }
  }
  return picked;
}

Dataset take_rows(const Dataset& dataset, const std::vector<bool>& picked, bool keep_picked) {
  std::vector<std::int32_t> indices;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (picked[i] == keep_picked) indices.push_back(static_cast<std::int32_t>(i));
  }
  auto [features, labels] = gather(dataset, indices);
  Dataset out;
  out.features = std::move(features);
  out.labels = std::move(labels);
  out.class_count = dataset.class_count;
  out.stats = dataset.stats;
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, double fraction,
                                             std::uint64_t seed) {
  if (!(fraction > 0.0) || !(fraction < 1.0)) {
    throw ParameterError("split fraction must lie in (0, 1)");
  }
  const auto picked = stratified_pick(dataset, fraction, seed, false, "split");
  return {take_rows(dataset, picked, true), take_rows(dataset, picked, false)};
}

Dataset stratified_subsample(const Dataset& dataset, double fraction, std::uint64_t seed) {
  const auto picked = stratified_pick(dataset, fraction, seed, true, "subsample");
  return take_rows(dataset, picked, true);
}

}  // namespace senn
