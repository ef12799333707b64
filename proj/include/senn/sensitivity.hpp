#pragma once

#include <cstdint>
#include <vector>

#include "senn/network.hpp"

namespace senn {

enum class SensitivityForm {
  paper,      // mean|g| / max(|w|, 1e-8)
  classical,  // mean|g| * |w|
};

// Running mean of |dLoss/dW| per active connection over one epoch's
// mini-batches. Aligned with the network's active set at reset time; a
// topology mutation in between invalidates the accumulator (detected via the
// network revision).
class SensitivityAccumulator {
 public:
  static constexpr double kWeightFloor = 1e-8;

  SensitivityAccumulator() = default;

  void reset(const SparseNetwork& net);
  void accumulate(const GradientSet& grads);

  std::size_t batch_count() const { return batch_count_; }
  std::uint64_t revision() const { return revision_; }

  // mean|g| per connection; throws ParameterError before the first batch.
  std::vector<std::vector<double>> mean_abs_gradient() const;

 private:
  std::vector<std::vector<double>> abs_sums_;
  std::size_t batch_count_ = 0;
  std::uint64_t revision_ = 0;
};

// Per-connection sensitivity, aligned with net's active set.
std::vector<std::vector<double>> connection_sensitivity(
    const SensitivityAccumulator& acc, const SparseNetwork& net,
    SensitivityForm form = SensitivityForm::paper);

// Per node, the sum of sensitivities over its outgoing active connections
// (output-layer nodes get 0). Indexed [neuron layer][node].
std::vector<std::vector<double>> node_sensitivity(
    const std::vector<std::vector<double>>& sensitivities, const TopologyMask& mask);

// The ceil(zeta * active) connections with smallest sensitivity, ties broken
// by (layer, source, target); the last surviving connection of any layer is
// exempt from removal.
std::vector<ConnectionRef> select_removals_by_sensitivity(
    const std::vector<std::vector<double>>& sensitivities, const TopologyMask& mask,
    double zeta);

}  // namespace senn
