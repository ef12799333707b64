#include "senn/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "senn/rng.hpp"

namespace senn {

namespace {

constexpr std::size_t kEvalChunk = 256;

void softmax_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double* row = m.row(r);
    double mx = row[0];
    for (std::size_t c = 1; c < m.cols(); ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] /= sum;
  }
}

double log_sum_exp(const double* row, std::size_t n) {
  double mx = row[0];
  for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, row[c]);
  double sum = 0.0;
  for (std::size_t c = 0; c < n; ++c) sum += std::exp(row[c] - mx);
  return mx + std::log(sum);
}

}  // namespace

SparseNetwork::SparseNetwork(TopologyMask mask, std::vector<std::vector<double>> weights)
    : mask_(std::move(mask)), weights_(std::move(weights)) {
  if (weights_.size() != mask_.layers.size()) {
    throw ConsistencyError("weight layers do not match mask layers");
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l].size() != mask_.layers[l].size()) {
      throw ConsistencyError("weight count does not match pair count in layer " +
                             std::to_string(l));
    }
  }
  biases_.resize(mask_.weight_layer_count());
  for (int l = 0; l < mask_.weight_layer_count(); ++l) {
    biases_[l].assign(mask_.layer_sizes[l + 1], 0.0);
  }
}

SparseNetwork SparseNetwork::from_connections(
    std::vector<std::int32_t> layer_sizes,
    const std::vector<std::pair<ConnectionRef, double>>& connections) {
  TopologyMask mask(std::move(layer_sizes));
  std::vector<std::vector<std::pair<NodePair, double>>> per_layer(mask.weight_layer_count());
  for (const auto& [ref, w] : connections) {
    if (!mask.in_range(ref.layer, ref.source, ref.target)) {
      throw ConsistencyError("connection out of range");
    }
    per_layer[ref.layer].push_back({{ref.source, ref.target}, w});
  }
  std::vector<std::vector<double>> weights(mask.weight_layer_count());
  for (int l = 0; l < mask.weight_layer_count(); ++l) {
    auto& entries = per_layer[l];
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (i > 0 && !(entries[i - 1].first < entries[i].first)) {
        throw ConsistencyError("duplicate connection in layer " + std::to_string(l));
      }
      mask.layers[l].push_back(entries[i].first);
      mask.members[l].insert(pair_key(entries[i].first.source, entries[i].first.target));
      weights[l].push_back(entries[i].second);
    }
  }
  mask.budget = mask.active_count();
  return SparseNetwork(std::move(mask), std::move(weights));
}

void SparseNetwork::erase_connections(const std::vector<ConnectionRef>& removals) {
  if (removals.empty()) return;
  std::vector<std::unordered_set<std::uint64_t>> doomed(mask_.weight_layer_count());
  for (const auto& ref : removals) {
    if (!mask_.in_range(ref.layer, ref.source, ref.target) ||
        !mask_.contains(ref.layer, ref.source, ref.target)) {
      throw ConsistencyError("removal of inactive connection (" + std::to_string(ref.layer) +
                             "," + std::to_string(ref.source) + "," +
                             std::to_string(ref.target) + ")");
    }
    if (!doomed[ref.layer].insert(pair_key(ref.source, ref.target)).second) {
      throw ConsistencyError("connection listed twice in removals");
    }
  }
  for (int l = 0; l < mask_.weight_layer_count(); ++l) {
    if (doomed[l].empty()) continue;
    auto& pairs = mask_.layers[l];
    auto& weights = weights_[l];
    std::size_t out = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const std::uint64_t key = pair_key(pairs[i].source, pairs[i].target);
      if (doomed[l].count(key)) {
        mask_.members[l].erase(key);
        continue;
      }
      pairs[out] = pairs[i];
      weights[out] = weights[i];
      ++out;
    }
    pairs.resize(out);
    weights.resize(out);
  }
  ++revision_;
}

void SparseNetwork::insert_connections(const std::vector<ConnectionRef>& additions,
                                       const std::vector<double>& weights) {
  if (additions.size() != weights.size()) {
    throw ConsistencyError("additions and weights differ in length");
  }
  if (additions.empty()) return;
  std::vector<std::vector<std::pair<NodePair, double>>> fresh(mask_.weight_layer_count());
  for (std::size_t i = 0; i < additions.size(); ++i) {
    const auto& ref = additions[i];
    if (!mask_.in_range(ref.layer, ref.source, ref.target)) {
      throw ConsistencyError("addition out of range");
    }
    if (mask_.contains(ref.layer, ref.source, ref.target)) {
      throw ConsistencyError("addition of already-active connection (" +
                             std::to_string(ref.layer) + "," + std::to_string(ref.source) +
                             "," + std::to_string(ref.target) + ")");
    }
    if (!mask_.members[ref.layer].insert(pair_key(ref.source, ref.target)).second) {
      throw ConsistencyError("connection listed twice in additions");
    }
    fresh[ref.layer].push_back({{ref.source, ref.target}, weights[i]});
  }
  for (int l = 0; l < mask_.weight_layer_count(); ++l) {
    if (fresh[l].empty()) continue;
    auto& pairs = mask_.layers[l];
    auto& wts = weights_[l];
    for (const auto& [pair, w] : fresh[l]) {
      pairs.push_back(pair);
      wts.push_back(w);
    }
    // single stable re-sort keeps (pair, weight) rows together
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pairs[a] < pairs[b]; });
    std::vector<NodePair> sorted_pairs(pairs.size());
    std::vector<double> sorted_wts(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      sorted_pairs[i] = pairs[order[i]];
      sorted_wts[i] = wts[order[i]];
    }
    pairs = std::move(sorted_pairs);
    wts = std::move(sorted_wts);
  }
  ++revision_;
}

void SparseNetwork::validate() const {
  mask_.validate();
  for (int l = 0; l < weight_layer_count(); ++l) {
    if (weights_[l].size() != mask_.layers[l].size()) {
      throw ConsistencyError("weights out of sync with mask in layer " + std::to_string(l));
    }
    for (double w : weights_[l]) {
      if (!std::isfinite(w)) throw NumericError("non-finite weight");
    }
    for (double b : biases_[l]) {
      if (!std::isfinite(b)) throw NumericError("non-finite bias");
    }
  }
}

ForwardTrace forward(const SparseNetwork& net, const Matrix& batch,
                     const DropoutSpec* dropout) {
  const auto& sizes = net.layer_sizes();
  if (batch.rows() == 0) throw InputError("empty input batch");
  if (batch.cols() != static_cast<std::size_t>(sizes.front())) {
    throw InputError("input has " + std::to_string(batch.cols()) + " features, expected " +
                     std::to_string(sizes.front()));
  }
  const int L = net.weight_layer_count();
  const std::size_t n = batch.rows();

  ForwardTrace trace;
  trace.batch_size = n;
  trace.post.reserve(L + 1);
  trace.pre.reserve(L);
  trace.post.push_back(batch);

  Rng dropout_rng(dropout ? dropout->seed : 0);
  const bool drop = dropout && dropout->rate > 0.0;
  const double keep_scale = drop ? 1.0 / (1.0 - dropout->rate) : 1.0;

  for (int l = 0; l < L; ++l) {
    const std::size_t width = sizes[l + 1];
    Matrix z(n, width);
    const auto bias = net.bias(l);
    for (std::size_t s = 0; s < n; ++s) {
      double* row = z.row(s);
      for (std::size_t j = 0; j < width; ++j) row[j] = bias[j];
    }
    const auto& pairs = net.mask().layers[l];
    const auto weights = net.weights(l);
    const Matrix& prev = trace.post[l];
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const std::int32_t src = pairs[i].source;
      const std::int32_t dst = pairs[i].target;
      const double w = weights[i];
      for (std::size_t s = 0; s < n; ++s) {
        z(s, dst) += prev(s, src) * w;
      }
    }
    trace.pre.push_back(z);
    Matrix a = std::move(z);
    if (l + 1 < L) {
      for (double& v : a.data()) v = v > 0.0 ? v : 0.0;
      if (drop) {
        for (double& v : a.data()) {
          v = dropout_rng.uniform() < dropout->rate ? 0.0 : v * keep_scale;
        }
      }
    } else {
      softmax_rows(a);
    }
    trace.post.push_back(std::move(a));
  }
  return trace;
}

BackwardResult backward(const SparseNetwork& net, const ForwardTrace& trace,
                        std::span<const std::int32_t> labels) {
  const int L = net.weight_layer_count();
  const std::size_t n = trace.batch_size;
  const std::int32_t classes = net.layer_sizes().back();
  if (labels.size() != n) throw InputError("label count does not match batch size");
  for (std::int32_t y : labels) {
    if (y < 0 || y >= classes) {
      throw InputError("label " + std::to_string(y) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
  }

  BackwardResult result;
  result.grads.revision = net.revision();
  result.grads.sample_count = n;
  result.grads.weight_grads.resize(L);
  result.grads.bias_grads.resize(L);

  const Matrix& z_out = trace.pre[L - 1];
  double loss = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    loss += log_sum_exp(z_out.row(s), z_out.cols()) - z_out(s, labels[s]);
  }
  loss /= static_cast<double>(n);
  result.loss = loss;

  // delta starts as (softmax - onehot) / n on the output layer
  Matrix delta = trace.post[L];
  for (std::size_t s = 0; s < n; ++s) delta(s, labels[s]) -= 1.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& v : delta.data()) v *= inv_n;

  for (int l = L - 1; l >= 0; --l) {
    const auto& pairs = net.mask().layers[l];
    const auto weights = net.weights(l);
    const Matrix& input = trace.post[l];

    auto& bias_grad = result.grads.bias_grads[l];
    bias_grad.assign(net.layer_sizes()[l + 1], 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      const double* row = delta.row(s);
      for (std::size_t j = 0; j < bias_grad.size(); ++j) bias_grad[j] += row[j];
    }

    auto& weight_grad = result.grads.weight_grads[l];
    weight_grad.assign(pairs.size(), 0.0);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const std::int32_t src = pairs[i].source;
      const std::int32_t dst = pairs[i].target;
      double g = 0.0;
      for (std::size_t s = 0; s < n; ++s) g += input(s, src) * delta(s, dst);
      weight_grad[i] = g;
    }

    if (l > 0) {
      Matrix prev_delta(n, net.layer_sizes()[l]);
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const std::int32_t src = pairs[i].source;
        const std::int32_t dst = pairs[i].target;
        const double w = weights[i];
        for (std::size_t s = 0; s < n; ++s) prev_delta(s, src) += w * delta(s, dst);
      }
      // d(post)/d(pre) recovered as post/pre: 1 for kept ReLU units,
      // 1/(1-rate) for dropout-scaled ones, 0 for dropped or negative units
      const Matrix& z = trace.pre[l - 1];
      const Matrix& a = trace.post[l];
      for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t j = 0; j < prev_delta.cols(); ++j) {
          const double zv = z(s, j);
          prev_delta(s, j) *= zv > 0.0 ? a(s, j) / zv : 0.0;
        }
      }
      delta = std::move(prev_delta);
    }
  }
  return result;
}

void sgd_step(SparseNetwork& net, const GradientSet& grads, double learning_rate) {
  if (learning_rate < 0.0) throw ParameterError("learning rate must be >= 0");
  if (grads.revision != net.revision()) {
    throw ConsistencyError("gradients computed for a different topology revision");
  }
  const int L = net.weight_layer_count();
  for (int l = 0; l < L; ++l) {
    if (grads.weight_grads[l].size() != net.weights(l).size() ||
        grads.bias_grads[l].size() != net.bias(l).size()) {
      throw ConsistencyError("gradient set does not align with the active set");
    }
    for (double g : grads.weight_grads[l]) {
      if (!std::isfinite(g)) throw NumericError("non-finite weight gradient");
    }
    for (double g : grads.bias_grads[l]) {
      if (!std::isfinite(g)) throw NumericError("non-finite bias gradient");
    }
  }
  for (int l = 0; l < L; ++l) {
    auto weights = net.weights(l);
    const auto& wg = grads.weight_grads[l];
    for (std::size_t i = 0; i < weights.size(); ++i) weights[i] -= learning_rate * wg[i];
    auto bias = net.bias(l);
    const auto& bg = grads.bias_grads[l];
    for (std::size_t j = 0; j < bias.size(); ++j) bias[j] -= learning_rate * bg[j];
  }
}

EvalResult evaluate(const SparseNetwork& net, const Dataset& dataset) {
  if (dataset.size() == 0) throw InputError("empty dataset");
  if (dataset.feature_count() != static_cast<std::size_t>(net.layer_sizes().front())) {
    throw InputError("dataset feature width does not match the input layer");
  }
  if (dataset.class_count > net.layer_sizes().back()) {
    throw InputError("dataset has more classes than the output layer");
  }
  const std::size_t n = dataset.size();
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < n; begin += kEvalChunk) {
    const std::size_t end = std::min(begin + kEvalChunk, n);
    Matrix chunk(end - begin, dataset.feature_count());
    for (std::size_t s = begin; s < end; ++s) {
      const double* src = dataset.features.row(s);
      std::copy(src, src + dataset.feature_count(), chunk.row(s - begin));
    }
    const ForwardTrace trace = forward(net, chunk);
    const Matrix& z_out = trace.pre.back();
    const Matrix& probs = trace.post.back();
    for (std::size_t s = begin; s < end; ++s) {
      const std::size_t r = s - begin;
      loss += log_sum_exp(z_out.row(r), z_out.cols()) - z_out(r, dataset.labels[s]);
      std::size_t best = 0;
      for (std::size_t c = 1; c < probs.cols(); ++c) {
        if (probs(r, c) > probs(r, best)) best = c;
      }
      if (static_cast<std::int32_t>(best) == dataset.labels[s]) ++correct;
    }
  }
  return {loss / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
}

}  // namespace senn
