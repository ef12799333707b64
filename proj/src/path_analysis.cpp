#include "senn/path_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace senn {

namespace {

double active_weight(const SparseNetwork& net, const ConnectionRef& ref) {
  const auto& pairs = net.mask().layers[ref.layer];
  const NodePair key{ref.source, ref.target};
  const auto it = std::lower_bound(pairs.begin(), pairs.end(), key);
  if (it == pairs.end() || *it != key) {
    throw ConsistencyError("path uses an inactive connection");
  }
  return net.weights(ref.layer)[static_cast<std::size_t>(it - pairs.begin())];
}

double edge_cost(double factor) {
  return factor == 0.0 ? std::numeric_limits<double>::infinity() : -std::log(factor);
}

}  // namespace

FeatureNorms::FeatureNorms(int weight_layer_count, double decay)
    : ema_(static_cast<std::size_t>(weight_layer_count), 0.0), decay_(decay) {
  if (weight_layer_count < 1) {
    throw ParameterError("feature norms need at least one weight layer");
  }
  if (!(decay >= 0.0) || decay >= 1.0) {
    throw ParameterError("feature norm decay must lie in [0, 1)");
  }
}

FeatureNorms::FeatureNorms(std::vector<double> values)
    : ema_(std::move(values)), batches_seen_(1) {
  if (ema_.empty()) throw ParameterError("feature norms need at least one weight layer");
  for (double v : ema_) {
    if (!(v >= 0.0)) throw ParameterError("feature norms must be non-negative");
  }
}

void FeatureNorms::update(const ForwardTrace& trace) {
  const auto layers = ema_.size();
  if (trace.post.size() != layers + 1) {
    throw ConsistencyError("trace layer count does not match feature norms");
  }
  if (trace.batch_size == 0) throw ConsistencyError("trace holds no samples");
  for (std::size_t l = 0; l < layers; ++l) {
    const Matrix& acts = trace.post[l];
    double sq = 0.0;
    for (std::size_t j = 0; j < acts.cols(); ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < acts.rows(); ++i) mean += acts(i, j);
      mean /= static_cast<double>(acts.rows());
      sq += mean * mean;
    }
    const double norm = std::sqrt(sq);
    ema_[l] = batches_seen_ == 0 ? norm : decay_ * ema_[l] + (1.0 - decay_) * norm;
  }
  ++batches_seen_;
}

double FeatureNorms::value(int weight_layer) const {
  if (weight_layer < 0 || static_cast<std::size_t>(weight_layer) >= ema_.size()) {
    throw ParameterError("weight layer out of range");
  }
  if (batches_seen_ == 0) {
    throw ConsistencyError("feature norms read before any update");
  }
  return std::max(ema_[static_cast<std::size_t>(weight_layer)], kFloor);
}

double normalized_weight(double weight, int layer, const FeatureNorms& norms) {
  return std::abs(weight) / norms.value(layer);
}

double path_importance(const Path& path, const SparseNetwork& net,
                       const FeatureNorms& norms) {
  const int W = net.weight_layer_count();
  if (path.nodes.size() != static_cast<std::size_t>(W) + 1) {
    throw ConsistencyError("path length does not match the network depth");
  }
  double log_sum = 0.0;
  for (int l = 0; l < W; ++l) {
    const double factor = normalized_weight(active_weight(net, path.connection(l)), l, norms);
    if (factor == 0.0) return 0.0;
    log_sum += std::log(factor);
  }
  return std::exp(log_sum);
}

double count_paths(const TopologyMask& mask) {
  std::vector<double> counts(static_cast<std::size_t>(mask.layer_sizes[0]), 1.0);
  for (int l = 0; l < mask.weight_layer_count(); ++l) {
    std::vector<double> next(static_cast<std::size_t>(mask.layer_sizes[l + 1]), 0.0);
    for (const auto& pair : mask.layers[l]) {
      next[static_cast<std::size_t>(pair.target)] += counts[static_cast<std::size_t>(pair.source)];
    }
    counts = std::move(next);
  }
  double total = 0.0;
  for (double c : counts) total += c;
  return total;
}

NodeImportanceTable node_importance_all(const SparseNetwork& net,
                                        const FeatureNorms& norms) {
  const auto& sizes = net.layer_sizes();
  const int W = net.weight_layer_count();
  NodeImportanceTable table;
  table.prefix.resize(sizes.size());
  table.suffix.resize(sizes.size());
  table.importance.resize(sizes.size());
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    table.prefix[k].assign(static_cast<std::size_t>(sizes[k]), 0.0);
    table.suffix[k].assign(static_cast<std::size_t>(sizes[k]), 0.0);
  }
  std::ranges::fill(table.prefix.front(), 1.0);
  std::ranges::fill(table.suffix.back(), 1.0);

  for (int l = 0; l < W; ++l) {
    const auto& pairs = net.mask().layers[l];
    const auto weights = net.weights(l);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double factor = normalized_weight(weights[i], l, norms);
      table.prefix[static_cast<std::size_t>(l) + 1][static_cast<std::size_t>(pairs[i].target)] +=
          table.prefix[static_cast<std::size_t>(l)][static_cast<std::size_t>(pairs[i].source)] *
          factor;
    }
  }
  for (int l = W - 1; l >= 0; --l) {
    const auto& pairs = net.mask().layers[l];
    const auto weights = net.weights(l);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double factor = normalized_weight(weights[i], l, norms);
      table.suffix[static_cast<std::size_t>(l)][static_cast<std::size_t>(pairs[i].source)] +=
          factor *
          table.suffix[static_cast<std::size_t>(l) + 1][static_cast<std::size_t>(pairs[i].target)];
    }
  }
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    table.importance[k].resize(static_cast<std::size_t>(sizes[k]));
    for (std::size_t i = 0; i < table.importance[k].size(); ++i) {
      table.importance[k][i] = table.prefix[k][i] * table.suffix[k][i];
    }
  }
  return table;
}

namespace {

struct PathCandidate {
  double cost = 0.0;  // sum of -ln(factor) accumulated input-to-output
  std::vector<std::int32_t> nodes;
};

// Weakest first: largest cost, ties toward the lexicographically smaller
// node sequence.
bool weaker_order(const PathCandidate& a, const PathCandidate& b) {
  if (a.cost != b.cost) return a.cost > b.cost;
  return a.nodes < b.nodes;
}

}  // namespace

std::vector<Path> k_weakest_paths(const SparseNetwork& net, const FeatureNorms& norms,
                                  std::size_t k) {
  std::vector<Path> result;
  if (k == 0) return result;

  const auto& sizes = net.layer_sizes();
  const int W = net.weight_layer_count();

  // Per node, the k weakest partial paths from the inputs. Any global
  // top-k path's prefix must rank top-k at its node because all paths
  // through a node share the same suffixes.
  std::vector<std::vector<PathCandidate>> current(static_cast<std::size_t>(sizes[0]));
  for (std::int32_t i = 0; i < sizes[0]; ++i) {
    current[static_cast<std::size_t>(i)].push_back({0.0, {i}});
  }
  for (int l = 0; l < W; ++l) {
    std::vector<std::vector<PathCandidate>> next(static_cast<std::size_t>(sizes[l + 1]));
    const auto& pairs = net.mask().layers[l];
    const auto weights = net.weights(l);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double cost = edge_cost(normalized_weight(weights[i], l, norms));
      auto& bucket = next[static_cast<std::size_t>(pairs[i].target)];
      for (const auto& cand : current[static_cast<std::size_t>(pairs[i].source)]) {
        PathCandidate extended;
        extended.cost = cand.cost + cost;
        extended.nodes = cand.nodes;
        extended.nodes.push_back(pairs[i].target);
        bucket.push_back(std::move(extended));
      }
    }
    for (auto& bucket : next) {
      std::sort(bucket.begin(), bucket.end(), weaker_order);
      if (bucket.size() > k) bucket.resize(k);
    }
    current = std::move(next);
  }

  std::vector<PathCandidate> merged;
  for (auto& bucket : current) {
    for (auto& cand : bucket) merged.push_back(std::move(cand));
  }
  std::sort(merged.begin(), merged.end(), weaker_order);
  if (merged.size() > k) merged.resize(k);

  result.reserve(merged.size());
  for (auto& cand : merged) result.push_back(Path{std::move(cand.nodes)});
  return result;
}

std::vector<double> regrowth_distribution(const NodeImportanceTable& table,
                                          const std::vector<NodeId>& eligible,
                                          double delta) {
  if (!(delta >= 0.0)) throw ParameterError("delta must be non-negative");
  std::vector<double> out(eligible.size(), 0.0);
  if (eligible.empty()) return out;

  double total = 0.0;
  for (const auto& id : eligible) {
    if (id.layer < 0 || static_cast<std::size_t>(id.layer) >= table.importance.size() ||
        id.index < 0 ||
        static_cast<std::size_t>(id.index) >= table.importance[static_cast<std::size_t>(id.layer)].size()) {
      throw ConsistencyError("eligible node lies outside the importance table");
    }
    total += table.at(id);
  }
  if (total > 0.0) {
    for (std::size_t i = 0; i < eligible.size(); ++i) {
      out[i] = delta * table.at(eligible[i]) / total;
    }
  } else {
    const double uniform = delta / static_cast<double>(eligible.size());
    std::ranges::fill(out, uniform);
  }
  return out;
}

}  // namespace senn
