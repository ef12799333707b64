#include "senn/topology.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "senn/rng.hpp"

namespace senn {

double connection_probability(double epsilon, std::int32_t fan_in, std::int32_t fan_out) {
  const double p = epsilon * (static_cast<double>(fan_in) + fan_out) /
                   (static_cast<double>(fan_in) * fan_out);
  return std::min(1.0, p);
}

double weight_init_bound(std::int32_t fan_in, std::int32_t fan_out) {
  return std::sqrt(6.0 / (static_cast<double>(fan_in) + fan_out));
}

SparseNetwork erdos_renyi_init(const std::vector<std::int32_t>& layer_sizes,
                               double epsilon, std::uint64_t seed) {
  if (epsilon <= 0.0) throw ParameterError("epsilon must be > 0");
  TopologyMask mask(layer_sizes);
  mask.epsilon = epsilon;
  std::vector<std::vector<double>> weights(mask.weight_layer_count());

  Rng rng(seed);
  for (int l = 0; l < mask.weight_layer_count(); ++l) {
    const std::int32_t fan_in = layer_sizes[l];
    const std::int32_t fan_out = layer_sizes[l + 1];
    const double p = connection_probability(epsilon, fan_in, fan_out);
    const double bound = weight_init_bound(fan_in, fan_out);
    for (std::int32_t s = 0; s < fan_in; ++s) {
      for (std::int32_t t = 0; t < fan_out; ++t) {
        if (rng.uniform() < p) {
          mask.layers[l].push_back({s, t});
          mask.members[l].insert(pair_key(s, t));
          weights[l].push_back(rng.uniform_in(-bound, bound));
        }
      }
    }
    if (mask.layers[l].empty()) {
      // a dead layer severs every path; force one connection
      const auto s = static_cast<std::int32_t>(rng.uniform_index(fan_in));
      const auto t = static_cast<std::int32_t>(rng.uniform_index(fan_out));
      mask.layers[l].push_back({s, t});
      mask.members[l].insert(pair_key(s, t));
      weights[l].push_back(rng.uniform_in(-bound, bound));
    }
  }
  mask.budget = mask.active_count();
  return SparseNetwork(std::move(mask), std::move(weights));
}

SparseNetwork fully_connected_init(const std::vector<std::int32_t>& layer_sizes,
                                   std::uint64_t seed) {
  TopologyMask mask(layer_sizes);
  mask.epsilon = calibrate_epsilon(layer_sizes, 1.0);
  std::vector<std::vector<double>> weights(mask.weight_layer_count());
  Rng rng(seed);
  for (int l = 0; l < mask.weight_layer_count(); ++l) {
    const std::int32_t fan_in = layer_sizes[l];
    const std::int32_t fan_out = layer_sizes[l + 1];
    const double bound = weight_init_bound(fan_in, fan_out);
    for (std::int32_t s = 0; s < fan_in; ++s) {
      for (std::int32_t t = 0; t < fan_out; ++t) {
        mask.layers[l].push_back({s, t});
        mask.members[l].insert(pair_key(s, t));
        weights[l].push_back(rng.uniform_in(-bound, bound));
      }
    }
  }
  mask.budget = mask.active_count();
  return SparseNetwork(std::move(mask), std::move(weights));
}

void remove_connections(SparseNetwork& net, const std::vector<ConnectionRef>& removals) {
  net.erase_connections(removals);
}

void add_connections(SparseNetwork& net, const std::vector<ConnectionRef>& additions,
                     std::uint64_t weight_init_seed) {
  // Malformed coordinates are diagnosed before capacity.
  for (const auto& ref : additions) {
    if (ref.layer < 0 || ref.layer >= net.weight_layer_count()) {
      throw ConsistencyError("addition layer out of range");
    }
  }
  if (net.active_count() + additions.size() > net.budget()) {
    throw BudgetError("adding " + std::to_string(additions.size()) +
                      " connections would exceed the budget of " +
                      std::to_string(net.budget()));
  }
  Rng rng(weight_init_seed);
  std::vector<double> weights;
  weights.reserve(additions.size());
  for (const auto& ref : additions) {
    const double bound =
        weight_init_bound(net.layer_sizes()[ref.layer], net.layer_sizes()[ref.layer + 1]);
    weights.push_back(rng.uniform_in(-bound, bound));
  }
  net.insert_connections(additions, weights);
}

double calibrate_epsilon(const std::vector<std::int32_t>& layer_sizes, double target_mu) {
  if (layer_sizes.size() < 2) throw ParameterError("topology needs at least 2 layers");
  if (!(target_mu > 0.0) || target_mu > 1.0) {
    throw ParameterError("target_mu must be in (0, 1]");
  }
  const int L = static_cast<int>(layer_sizes.size()) - 1;
  std::vector<double> possible(L), coeff(L), saturation(L);
  double total_possible = 0.0;
  for (int l = 0; l < L; ++l) {
    possible[l] = static_cast<double>(layer_sizes[l]) * layer_sizes[l + 1];
    coeff[l] = static_cast<double>(layer_sizes[l]) + layer_sizes[l + 1];
    saturation[l] = possible[l] / coeff[l];  // epsilon at which layer l is fully connected
    total_possible += possible[l];
  }
  const double target_count = target_mu * total_possible;

  // expected(eps) = sum_l min(possible_l, eps * coeff_l) is piecewise linear;
  // walk the saturation breakpoints in ascending order
  std::vector<int> order(L);
  for (int l = 0; l < L; ++l) order[l] = l;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return saturation[a] < saturation[b]; });

  double saturated_sum = 0.0;
  double active_coeff = 0.0;
  for (int l = 0; l < L; ++l) active_coeff += coeff[l];

  double prev_break = 0.0;
  for (int idx = 0; idx <= L; ++idx) {
    const double next_break = idx < L ? saturation[order[idx]] : saturation[order[L - 1]];
    if (active_coeff > 0.0) {
      const double eps = (target_count - saturated_sum) / active_coeff;
      if (eps >= prev_break && (idx == L || eps <= next_break)) {
        return eps;
      }
    }
    if (idx < L) {
      saturated_sum += possible[order[idx]];
      active_coeff -= coeff[order[idx]];
      prev_break = next_break;
    }
  }
  // target_mu == 1 up to rounding: the saturation boundary covers it
  return saturation[order[L - 1]];
}

}  // namespace senn
