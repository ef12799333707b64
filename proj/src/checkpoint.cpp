#include "senn/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace senn {

namespace {

constexpr const char* kMagic = "senn-checkpoint v1";

[[noreturn]] void malformed(const std::string& path, std::size_t line,
                            const std::string& message) {
  throw FormatError(path + ":" + std::to_string(line) + ": " + message);
}

struct LineReader {
  std::ifstream in;
  std::string path;
  std::size_t number = 0;

  std::string next(const char* expectation) {
    std::string line;
    if (!std::getline(in, line)) {
      malformed(path, number + 1, std::string("missing ") + expectation);
    }
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }
};

}  // namespace

std::string double_to_hex(double value) {
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx",
                static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(value)));
  return buffer;
}

double hex_to_double(const std::string& text) {
  if (text.size() != 16) throw FormatError("expected 16 hex digits, got '" + text + "'");
  char* end = nullptr;
  const unsigned long long bits = std::strtoull(text.c_str(), &end, 16);
  if (end != text.c_str() + 16) {
    throw FormatError("expected 16 hex digits, got '" + text + "'");
  }
  return std::bit_cast<double>(static_cast<std::uint64_t>(bits));
}

void save_checkpoint(const SparseNetwork& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path + " for writing");
  const auto& mask = net.mask();

  out << kMagic << '\n';
  out << "layers " << mask.layer_sizes.size();
  for (std::int32_t n : mask.layer_sizes) out << ' ' << n;
  out << '\n';
  out << "budget " << mask.budget << '\n';
  out << "epsilon " << double_to_hex(mask.epsilon) << '\n';
  out << "connections " << mask.active_count() << '\n';
  for (int l = 0; l < mask.weight_layer_count(); ++l) {
    const auto& pairs = mask.layers[static_cast<std::size_t>(l)];
    const auto weights = net.weights(l);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      out << l << ' ' << pairs[i].source << ' ' << pairs[i].target << ' '
          << double_to_hex(weights[i]) << '\n';
    }
  }
  std::size_t bias_count = 0;
  for (int l = 0; l < mask.weight_layer_count(); ++l) {
    bias_count += static_cast<std::size_t>(mask.layer_sizes[static_cast<std::size_t>(l) + 1]);
  }
  out << "biases " << bias_count << '\n';
  for (int l = 0; l < mask.weight_layer_count(); ++l) {
    const auto bias = net.bias(l);
    for (std::size_t i = 0; i < bias.size(); ++i) {
      out << l << ' ' << i << ' ' << double_to_hex(bias[i]) << '\n';
    }
  }
  if (!out) throw InputError("failed writing " + path);
}

SparseNetwork load_checkpoint(const std::string& path) {
  LineReader reader;
  reader.in.open(path);
  if (!reader.in) throw InputError("cannot open " + path);
  reader.path = path;

  if (reader.next("header") != kMagic) {
    malformed(path, 1, std::string("unsupported checkpoint version (expected '") + kMagic +
                           "')");
  }

  const auto parse_counted = [&](const char* keyword) {
    std::stringstream line(reader.next(keyword));
    std::string word;
    long long count = -1;
    if (!(line >> word >> count) || word != keyword || count < 0) {
      malformed(path, reader.number, std::string("expected '") + keyword + " <count>'");
    }
    return static_cast<std::size_t>(count);
  };

  std::stringstream layer_line(reader.next("layers"));
  std::string word;
  std::size_t layer_count = 0;
  if (!(layer_line >> word >> layer_count) || word != "layers" || layer_count < 2) {
    malformed(path, reader.number, "expected 'layers <count> <sizes...>'");
  }
  std::vector<std::int32_t> sizes(layer_count);
  for (auto& n : sizes) {
    if (!(layer_line >> n) || n < 1) {
      malformed(path, reader.number, "bad layer size");
    }
  }

  const std::size_t budget = parse_counted("budget");

  std::stringstream eps_line(reader.next("epsilon"));
  std::string eps_hex;
  if (!(eps_line >> word >> eps_hex) || word != "epsilon") {
    malformed(path, reader.number, "expected 'epsilon <hex>'");
  }
  double epsilon = 0.0;
  try {
    epsilon = hex_to_double(eps_hex);
  } catch (const FormatError& error) {
    malformed(path, reader.number, error.what());
  }

  const std::size_t connection_count = parse_counted("connections");
  std::vector<std::pair<ConnectionRef, double>> connections;
  connections.reserve(connection_count);
  for (std::size_t i = 0; i < connection_count; ++i) {
    std::stringstream line(reader.next("connection line"));
    ConnectionRef ref;
    std::string hex;
    if (!(line >> ref.layer >> ref.source >> ref.target >> hex)) {
      malformed(path, reader.number, "expected 'layer source target weight'");
    }
    try {
      connections.emplace_back(ref, hex_to_double(hex));
    } catch (const FormatError& error) {
      malformed(path, reader.number, error.what());
    }
  }

  SparseNetwork net;
  try {
    net = SparseNetwork::from_connections(sizes, connections);
  } catch (const Error& error) {
    throw FormatError(path + ": " + error.what());
  }
  if (budget < net.active_count()) {
    malformed(path, reader.number, "budget smaller than the connection count");
  }
  net.set_budget(budget);
  net.set_epsilon(epsilon);

  const std::size_t bias_count = parse_counted("biases");
  std::size_t expected_biases = 0;
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    expected_biases += static_cast<std::size_t>(sizes[l]);
  }
  if (bias_count != expected_biases) {
    malformed(path, reader.number, "bias count does not match the layer sizes");
  }
  for (std::size_t i = 0; i < bias_count; ++i) {
    std::stringstream line(reader.next("bias line"));
    int layer = 0;
    std::size_t index = 0;
    std::string hex;
    if (!(line >> layer >> index >> hex)) {
      malformed(path, reader.number, "expected 'layer index value'");
    }
    if (layer < 0 || layer >= net.weight_layer_count() ||
        index >= net.bias(layer).size()) {
      malformed(path, reader.number, "bias coordinate out of range");
    }
    try {
      net.bias(layer)[index] = hex_to_double(hex);
    } catch (const FormatError& error) {
      malformed(path, reader.number, error.what());
    }
  }
  return net;
}

std::string inspect_checkpoint(const std::string& path) {
  const SparseNetwork net = load_checkpoint(path);
  const auto& mask = net.mask();
  const auto stats = sparsity_stats(mask);

  std::stringstream out;
  out << "checkpoint: " << path << '\n';
  out << "layers:";
  for (std::size_t k = 0; k < mask.layer_sizes.size(); ++k) {
    out << (k == 0 ? " " : " -> ") << mask.layer_sizes[k];
  }
  out << '\n';
  char mu[32];
  std::snprintf(mu, sizeof mu, "%.6g", stats.mu);
  out << "active connections: " << mask.active_count() << " / " << mask.possible_count()
      << " possible (mu " << mu << ")\n";
  out << "budget: " << mask.budget << '\n';
  char eps[32];
  std::snprintf(eps, sizeof eps, "%.6g", mask.epsilon);
  out << "epsilon: " << eps << '\n';
  for (int l = 0; l < mask.weight_layer_count(); ++l) {
    const auto possible = static_cast<std::size_t>(mask.layer_sizes[static_cast<std::size_t>(l)]) *
                          static_cast<std::size_t>(mask.layer_sizes[static_cast<std::size_t>(l) + 1]);
    out << "layer " << l << ": " << stats.per_layer[static_cast<std::size_t>(l)]
        << " active / " << possible << " possible\n";
  }
  return out.str();
}

}  // namespace senn
