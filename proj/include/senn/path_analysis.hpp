#pragma once

#include <cstdint>
#include <vector>

#include "senn/network.hpp"

namespace senn {

// Per weight layer, an exponential moving average (decay 0.9) of the
// Euclidean norm of the batch-mean activation vector feeding that layer.
// The first update initializes the average to the observation. Values are
// floored at 1e-12 so normalized weights stay finite. Reading a value before
// any update (outside the fixed-value constructor) throws ConsistencyError.
class FeatureNorms {
 public:
  static constexpr double kFloor = 1e-12;

  FeatureNorms() = default;
  explicit FeatureNorms(int weight_layer_count, double decay = 0.9);

  // Test/tool constructor: fixes the norms to explicit values.
  explicit FeatureNorms(std::vector<double> values);

  void update(const ForwardTrace& trace);

  double value(int weight_layer) const;
  int weight_layer_count() const { return static_cast<int>(ema_.size()); }
  std::size_t batches_seen() const { return batches_seen_; }

 private:
  std::vector<double> ema_;
  double decay_ = 0.9;
  std::size_t batches_seen_ = 0;
};

// |w| / |F_l|, the per-connection factor of path importance.
double normalized_weight(double weight, int layer, const FeatureNorms& norms);

// An input-to-output path: one node per neuron layer, consecutive nodes
// joined by an active connection.
struct Path {
  std::vector<std::int32_t> nodes;  // length = weight layers + 1

  ConnectionRef connection(int weight_layer) const {
    return {weight_layer, nodes[weight_layer], nodes[weight_layer + 1]};
  }
  friend auto operator<=>(const Path&, const Path&) = default;
};

// Product of normalized weights along the path, accumulated in log domain
// (0 as soon as any factor is 0).
double path_importance(const Path& path, const SparseNetwork& net,
                       const FeatureNorms& norms);

// Total number of input-to-output paths, by forward DP over per-node path
// counts. Doubles saturate gracefully for astronomically large counts.
double count_paths(const TopologyMask& mask);

struct NodeId {
  std::int32_t layer = 0;  // neuron layer 0..L
  std::int32_t index = 0;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

// Per node: prefix aggregate A (sum over input->node prefix paths of their
// factor products, 1 on inputs), suffix aggregate B (symmetric from the
// output side) and importance I = A * B. Summing I over any one neuron layer
// reproduces the total path importance.
struct NodeImportanceTable {
  std::vector<std::vector<double>> prefix;      // A, indexed [layer][node]
  std::vector<std::vector<double>> suffix;      // B
  std::vector<std::vector<double>> importance;  // I = A * B

  double at(NodeId id) const { return importance[id.layer][id.index]; }
};

// O(active connections) computation of the full table.
NodeImportanceTable node_importance_all(const SparseNetwork& net,
                                        const FeatureNorms& norms);

// The k globally smallest-importance paths, ascending (weakest first).
// Ranking key is the path cost sum(-ln factor) accumulated input-to-output
// (zero factors cost +infinity and rank weakest), ties broken by
// lexicographic node sequence. Returns all paths when fewer than k exist.
std::vector<Path> k_weakest_paths(const SparseNetwork& net, const FeatureNorms& norms,
                                  std::size_t k);

// Per-eligible-node regrowth weights delta * I(n) / sum_eligible I (uniform
// fallback when the eligible total is not positive). Values sum to delta.
std::vector<double> regrowth_distribution(const NodeImportanceTable& table,
                                          const std::vector<NodeId>& eligible,
                                          double delta);

}  // namespace senn
