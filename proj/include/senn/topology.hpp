#pragma once

#include <cstdint>
#include <vector>

#include "senn/network.hpp"

namespace senn {

// Eq.-style existence probability for one weight layer, clamped to 1.
double connection_probability(double epsilon, std::int32_t fan_in, std::int32_t fan_out);

// Uniform weight-init bound for a layer: sqrt(6 / (fan_in + fan_out)). Fresh
// draws use Uniform(-bound, +bound), for initial and regrown connections alike.
double weight_init_bound(std::int32_t fan_in, std::int32_t fan_out);

// Erdos-Renyi initialization: every possible connection of weight layer l
// exists independently with probability
//   p_l = min(1, epsilon * (n_l + n_{l+1}) / (n_l * n_{l+1})).
// A layer that realizes zero connections gets one uniformly random connection
// forced in. Budget is fixed to the realized total. Biases start at zero.
SparseNetwork erdos_renyi_init(const std::vector<std::int32_t>& layer_sizes,
                               double epsilon, std::uint64_t seed);

// Fully-connected network with the same weight-init distribution (the dense
// baseline); budget covers every possible connection.
SparseNetwork fully_connected_init(const std::vector<std::int32_t>& layer_sizes,
                                   std::uint64_t seed);

// Deactivates currently-active pairs and discards their weights.
void remove_connections(SparseNetwork& net, const std::vector<ConnectionRef>& removals);

// Activates currently-inactive pairs with fresh weights drawn from the
// weight-init distribution (in list order, seeded). Throws BudgetError when
// the post-add total would exceed the budget.
void add_connections(SparseNetwork& net, const std::vector<ConnectionRef>& additions,
                     std::uint64_t weight_init_seed);

// Inverts the expected active count of erdos_renyi_init: returns epsilon such
// that the expected sparsity equals target_mu (exact inversion of the
// piecewise-linear expected count; target_mu = 1 returns the saturation
// boundary).
double calibrate_epsilon(const std::vector<std::int32_t>& layer_sizes, double target_mu);

}  // namespace senn
