#include "senn/mask.hpp"

#include <algorithm>
#include <string>

namespace senn {

TopologyMask::TopologyMask(std::vector<std::int32_t> sizes) : layer_sizes(std::move(sizes)) {
  if (layer_sizes.size() < 2) throw ParameterError("topology needs at least 2 layers");
  for (auto n : layer_sizes) {
    if (n < 1) throw ParameterError("every layer size must be >= 1");
  }
  layers.resize(layer_sizes.size() - 1);
  members.resize(layer_sizes.size() - 1);
}

std::size_t TopologyMask::active_count() const {
  std::size_t total = 0;
  for (const auto& layer : layers) total += layer.size();
  return total;
}

std::size_t TopologyMask::possible_count() const {
  std::size_t total = 0;
  for (int l = 0; l + 1 < static_cast<int>(layer_sizes.size()); ++l) {
    total += static_cast<std::size_t>(layer_sizes[l]) * layer_sizes[l + 1];
  }
  return total;
}

void TopologyMask::validate() const {
  if (layers.size() != layer_sizes.size() - 1 || members.size() != layers.size()) {
    throw ConsistencyError("mask layer structure does not match layer sizes");
  }
  for (int l = 0; l < weight_layer_count(); ++l) {
    const auto& pairs = layers[l];
    if (pairs.size() != members[l].size()) {
      throw ConsistencyError("mask membership set out of sync in layer " + std::to_string(l));
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& p = pairs[i];
      if (!in_range(l, p.source, p.target)) {
        throw ConsistencyError("mask pair out of range in layer " + std::to_string(l));
      }
      if (i > 0 && !(pairs[i - 1] < p)) {
        throw ConsistencyError("mask pairs unsorted or duplicated in layer " + std::to_string(l));
      }
      if (members[l].count(pair_key(p.source, p.target)) == 0) {
        throw ConsistencyError("mask membership missing a pair in layer " + std::to_string(l));
      }
    }
  }
  if (active_count() > budget && budget > 0) {
    throw ConsistencyError("active count exceeds budget");
  }
}

SparsityStats sparsity_stats(const TopologyMask& mask) {
  SparsityStats stats;
  stats.per_layer.reserve(mask.layers.size());
  for (const auto& layer : mask.layers) stats.per_layer.push_back(layer.size());
  const std::size_t possible = mask.possible_count();
  stats.mu = possible == 0 ? 0.0 : static_cast<double>(mask.active_count()) / possible;
  return stats;
}

}  // namespace senn
