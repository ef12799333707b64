#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "senn/data.hpp"
#include "senn/mask.hpp"
#include "senn/matrix.hpp"

namespace senn {

// Sparse MLP: per weight layer a vector of weights aligned index-for-index
// with the mask's sorted pair list, plus dense biases on neuron layers 1..L.
// Hidden activations are rectified-linear, the output layer is softmax.
// Inactive coordinates are not stored at all, so they contribute exactly zero
// to every computation. `revision` increments on every topology mutation;
// gradient and sensitivity structures carry it to detect stale alignment.
class SparseNetwork {
 public:
  SparseNetwork() = default;
  SparseNetwork(TopologyMask mask, std::vector<std::vector<double>> weights);

  // Test/IO helper: builds a network from an explicit connection list
  // (deduplicated coordinates required; any order accepted).
  static SparseNetwork from_connections(
      std::vector<std::int32_t> layer_sizes,
      const std::vector<std::pair<ConnectionRef, double>>& connections);

  const TopologyMask& mask() const { return mask_; }
  const std::vector<std::int32_t>& layer_sizes() const { return mask_.layer_sizes; }
  int weight_layer_count() const { return mask_.weight_layer_count(); }
  std::size_t active_count() const { return mask_.active_count(); }
  std::uint64_t revision() const { return revision_; }

  std::span<const double> weights(int layer) const { return weights_[layer]; }
  std::span<double> weights(int layer) { return {weights_[layer]}; }

  // bias(l) is the bias vector of neuron layer l+1 (targets of weight layer l)
  std::span<const double> bias(int layer) const { return biases_[layer]; }
  std::span<double> bias(int layer) { return {biases_[layer]}; }

  std::size_t budget() const { return mask_.budget; }
  void set_budget(std::size_t budget) { mask_.budget = budget; }
  void set_epsilon(double epsilon) { mask_.epsilon = epsilon; }

  // Removes currently-active connections; throws ConsistencyError when a ref
  // is inactive or listed twice. Weights are discarded with the pairs.
  void erase_connections(const std::vector<ConnectionRef>& removals);

  // Inserts currently-inactive, in-range connections with the given weights.
  // Throws ConsistencyError on duplicates or active pairs. Budget is not
  // checked here (topology::add_connections enforces it).
  void insert_connections(const std::vector<ConnectionRef>& additions,
                          const std::vector<double>& weights);

  void validate() const;

 private:
  TopologyMask mask_;
  std::vector<std::vector<double>> weights_;  // aligned with mask_.layers
  std::vector<std::vector<double>> biases_;   // biases_[l] has layer_sizes[l+1] entries
  std::uint64_t revision_ = 0;
};

// Activations of one mini-batch. post[k] holds neuron layer k (post[0] is the
// input batch, post[L] the softmax output); pre[l] holds the pre-activations
// of neuron layer l+1.
struct ForwardTrace {
  std::vector<Matrix> post;
  std::vector<Matrix> pre;
  std::size_t batch_size = 0;
};

// Batch-averaged gradients, aligned with the network's active set.
struct GradientSet {
  std::vector<std::vector<double>> weight_grads;
  std::vector<std::vector<double>> bias_grads;
  std::size_t sample_count = 0;
  std::uint64_t revision = 0;
};

// Inverted dropout on hidden activations: kept units are scaled by
// 1/(1 - rate) so evaluation needs no rescaling. Mask drawn from seed alone,
// independent of the weights.
struct DropoutSpec {
  double rate = 0.0;
  std::uint64_t seed = 0;
};

ForwardTrace forward(const SparseNetwork& net, const Matrix& batch,
                     const DropoutSpec* dropout = nullptr);

struct BackwardResult {
  double loss = 0.0;  // mean softmax cross-entropy
  GradientSet grads;
};

BackwardResult backward(const SparseNetwork& net, const ForwardTrace& trace,
                        std::span<const std::int32_t> labels);

// w <- w - lr * g on every active connection and bias. Throws NumericError on
// a non-finite gradient, ConsistencyError when grads do not align with net.
void sgd_step(SparseNetwork& net, const GradientSet& grads, double learning_rate);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Mean cross-entropy and argmax accuracy; prediction ties break toward the
// smallest class index.
EvalResult evaluate(const SparseNetwork& net, const Dataset& dataset);

}  // namespace senn
