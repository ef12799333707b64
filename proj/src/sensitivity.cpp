#include "senn/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace senn {

void SensitivityAccumulator::reset(const SparseNetwork& net) {
  abs_sums_.assign(static_cast<std::size_t>(net.weight_layer_count()), {});
  for (int l = 0; l < net.weight_layer_count(); ++l) {
    abs_sums_[static_cast<std::size_t>(l)].assign(net.weights(l).size(), 0.0);
  }
  batch_count_ = 0;
  revision_ = net.revision();
}

void SensitivityAccumulator::accumulate(const GradientSet& grads) {
  if (grads.revision != revision_) {
    throw ConsistencyError("gradient revision does not match the accumulator");
  }
  if (grads.weight_grads.size() != abs_sums_.size()) {
    throw ConsistencyError("gradient layer count does not match the accumulator");
  }
  for (std::size_t l = 0; l < abs_sums_.size(); ++l) {
    if (grads.weight_grads[l].size() != abs_sums_[l].size()) {
      throw ConsistencyError("gradient width does not match the accumulator");
    }
    for (std::size_t i = 0; i < abs_sums_[l].size(); ++i) {
      abs_sums_[l][i] += std::abs(grads.weight_grads[l][i]);
    }
  }
  ++batch_count_;
}

std::vector<std::vector<double>> SensitivityAccumulator::mean_abs_gradient() const {
  if (batch_count_ == 0) {
    throw ParameterError("sensitivity requested before any batch was accumulated");
  }
  auto means = abs_sums_;
  const double inv = 1.0 / static_cast<double>(batch_count_);
  for (auto& layer : means) {
    for (double& v : layer) v *= inv;
  }
  return means;
}

std::vector<std::vector<double>> connection_sensitivity(
    const SensitivityAccumulator& acc, const SparseNetwork& net, SensitivityForm form) {
  if (acc.revision() != net.revision()) {
    throw ConsistencyError("sensitivity accumulator is stale for this network");
  }
  auto result = acc.mean_abs_gradient();
  for (int l = 0; l < net.weight_layer_count(); ++l) {
    const auto weights = net.weights(l);
    auto& layer = result[static_cast<std::size_t>(l)];
    if (layer.size() != weights.size()) {
      throw ConsistencyError("sensitivity width does not match the network");
    }
    for (std::size_t i = 0; i < layer.size(); ++i) {
      const double mag = std::abs(weights[i]);
      if (form == SensitivityForm::paper) {
        layer[i] /= std::max(mag, SensitivityAccumulator::kWeightFloor);
      } else {
        layer[i] *= mag;
      }
    }
  }
  return result;
}

std::vector<std::vector<double>> node_sensitivity(
    const std::vector<std::vector<double>>& sensitivities, const TopologyMask& mask) {
  if (sensitivities.size() != static_cast<std::size_t>(mask.weight_layer_count())) {
    throw ConsistencyError("sensitivity layer count does not match the mask");
  }
  std::vector<std::vector<double>> result(mask.layer_sizes.size());
  for (std::size_t k = 0; k < mask.layer_sizes.size(); ++k) {
    result[k].assign(static_cast<std::size_t>(mask.layer_sizes[k]), 0.0);
  }
  for (int l = 0; l < mask.weight_layer_count(); ++l) {
    const auto& pairs = mask.layers[static_cast<std::size_t>(l)];
    const auto& values = sensitivities[static_cast<std::size_t>(l)];
    if (values.size() != pairs.size()) {
      throw ConsistencyError("sensitivity width does not match the mask");
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      result[static_cast<std::size_t>(l)][static_cast<std::size_t>(pairs[i].source)] +=
          values[i];
    }
  }
  return result;
}

std::vector<ConnectionRef> select_removals_by_sensitivity(
    const std::vector<std::vector<double>>& sensitivities, const TopologyMask& mask,
    double zeta) {
  if (!(zeta > 0.0) || zeta >= 1.0) {
    throw ParameterError("zeta must lie in (0, 1)");
  }
  if (sensitivities.size() != static_cast<std::size_t>(mask.weight_layer_count())) {
    throw ConsistencyError("sensitivity layer count does not match the mask");
  }
  struct Candidate {
    double value;
    ConnectionRef ref;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(mask.active_count());
  for (int l = 0; l < mask.weight_layer_count(); ++l) {
    const auto& pairs = mask.layers[static_cast<std::size_t>(l)];
    const auto& values = sensitivities[static_cast<std::size_t>(l)];
    if (values.size() != pairs.size()) {
      throw ConsistencyError("sensitivity width does not match the mask");
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      candidates.push_back({values[i], {l, pairs[i].source, pairs[i].target}});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.value, a.ref) < std::tie(b.value, b.ref);
  });

  const auto quota = static_cast<std::size_t>(
      std::ceil(zeta * static_cast<double>(mask.active_count())));
  std::vector<std::size_t> remaining(mask.layers.size());
  for (std::size_t l = 0; l < mask.layers.size(); ++l) remaining[l] = mask.layers[l].size();

  std::vector<ConnectionRef> removals;
  removals.reserve(quota);
  for (const auto& cand : candidates) {
    if (removals.size() >= quota) break;
    auto& left = remaining[static_cast<std::size_t>(cand.ref.layer)];
    if (left <= 1) continue;  // a layer must keep its last connection
    --left;
    removals.push_back(cand.ref);
  }
  return removals;
}

}  // namespace senn
