#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "senn/errors.hpp"

namespace senn {

// Active connection (source, target) inside one weight layer.
struct NodePair {
  std::int32_t source = 0;
  std::int32_t target = 0;
  friend auto operator<=>(const NodePair&, const NodePair&) = default;
};

// Weight layer l connects neuron layer l to neuron layer l+1 (0-based, L weight
// layers for L+1 neuron layers). Ordering is lexicographic (layer, source,
// target) everywhere a tie-break is needed.
struct ConnectionRef {
  std::int32_t layer = 0;
  std::int32_t source = 0;
  std::int32_t target = 0;
  friend auto operator<=>(const ConnectionRef&, const ConnectionRef&) = default;
};

inline std::uint64_t pair_key(std::int32_t source, std::int32_t target) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(source)) << 32) |
         static_cast<std::uint32_t>(target);
}

// Sparse connectivity pattern: per weight layer the active pairs, sorted by
// (source, target), plus a hash set for O(1) membership. Iteration over
// `layers` is the canonical deterministic order. `budget` is the ceiling on
// the total active count fixed at initialization; `epsilon` is the
// Erdos-Renyi sparsity parameter the mask was built with (0 when built by
// hand).
struct TopologyMask {
  std::vector<std::int32_t> layer_sizes;
  std::vector<std::vector<NodePair>> layers;
  std::vector<std::unordered_set<std::uint64_t>> members;
  std::size_t budget = 0;
  double epsilon = 0.0;

  TopologyMask() = default;
  explicit TopologyMask(std::vector<std::int32_t> sizes);

  int weight_layer_count() const { return static_cast<int>(layer_sizes.size()) - 1; }

  bool contains(int layer, std::int32_t source, std::int32_t target) const {
    return members[layer].count(pair_key(source, target)) > 0;
  }

  bool in_range(int layer, std::int32_t source, std::int32_t target) const {
    return layer >= 0 && layer < weight_layer_count() && source >= 0 &&
           source < layer_sizes[layer] && target >= 0 && target < layer_sizes[layer + 1];
  }

  std::size_t active_count() const;
  std::size_t possible_count() const;

  // Throws ConsistencyError if pairs are out of range, unsorted, duplicated,
  // or the membership sets disagree with the pair lists.
  void validate() const;
};

struct SparsityStats {
  double mu = 0.0;                         // active / possible
  std::vector<std::size_t> per_layer;      // active count per weight layer
};

SparsityStats sparsity_stats(const TopologyMask& mask);

}  // namespace senn
