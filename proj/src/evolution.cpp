#include "senn/evolution.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "senn/rng.hpp"
#include "senn/topology.hpp"

namespace senn {

std::string strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::dense: return "dense";
    case Strategy::set: return "set";
    case Strategy::path_weight: return "path_weight";
    case Strategy::sensitivity: return "sensitivity";
  }
  throw ParameterError("unknown strategy");
}

Strategy parse_strategy(const std::string& name) {
  if (name == "dense") return Strategy::dense;
  if (name == "set") return Strategy::set;
  if (name == "path_weight") return Strategy::path_weight;
  if (name == "sensitivity") return Strategy::sensitivity;
  throw ParameterError("unknown strategy '" + name + "'");
}

void EvolutionParams::validate() const {
  if (!(lambda > 0.0) || lambda >= 1.0) throw ParameterError("lambda must lie in (0, 1)");
  if (!(zeta > 0.0) || zeta >= 1.0) throw ParameterError("zeta must lie in (0, 1)");
  if (!(delta > 0.0)) throw ParameterError("delta must be positive");
  for (const auto& [value, bounds, name] :
       {std::tuple{lambda, lambda_bounds, "lambda"}, std::tuple{zeta, zeta_bounds, "zeta"},
        std::tuple{delta, delta_bounds, "delta"}}) {
    if (!(bounds.min > 0.0) || bounds.min > bounds.max) {
      throw ParameterError(std::string(name) + " bounds are not ordered");
    }
    if (value < bounds.min || value > bounds.max) {
      throw ParameterError(std::string(name) + " lies outside its bounds");
    }
  }
}

EvolutionParams initial_params(ParamMode mode) {
  EvolutionParams params;
  if (mode == ParamMode::time_varying) {
    params.lambda = 0.2;
    params.zeta = 0.5;
    params.delta = 2.0;
    params.time_varying = true;
  }
  return params;
}

void ControllerConstants::validate() const {
  if (!(k1 > 1.0)) throw ParameterError("K1 must exceed 1");
  if (!(k2 > 0.0) || k2 >= 1.0) throw ParameterError("K2 must lie in (0, 1)");
  if (!(k3 > 0.0) || !(k3 < k4) || !(k4 < 1.0)) {
    throw ParameterError("K3 and K4 must satisfy 0 < K3 < K4 < 1");
  }
}

std::pair<double, double> compute_criteria(const std::vector<double>& importance_values,
                                           const std::vector<std::size_t>& removed_indices) {
  if (importance_values.empty()) {
    throw ParameterError("criteria need at least one importance value");
  }
  double prim = 0.0;
  for (double v : importance_values) prim += v;
  prim /= static_cast<double>(importance_values.size());

  double sec = 0.0;
  if (!removed_indices.empty()) {
    for (std::size_t idx : removed_indices) {
      if (idx >= importance_values.size()) {
        throw ConsistencyError("removed index lies outside the importance values");
      }
      sec += importance_values[idx];
    }
    sec /= static_cast<double>(removed_indices.size());
  }
  return {prim, sec};
}

EvolutionParams update_params(EvolutionParams params, const ControllerConstants& constants,
                              double c_prim, double c_sec) {
  constants.validate();
  if (!(c_prim >= 0.0)) throw ParameterError("C_prim must be non-negative");
  double scale = 1.0;
  if (c_sec < constants.k3 * c_prim) {
    scale = constants.k1;
  } else if (c_sec > constants.k4 * c_prim) {
    scale = constants.k2;
  }
  params.lambda = std::clamp(params.lambda * scale, params.lambda_bounds.min,
                             params.lambda_bounds.max);
  params.zeta = std::clamp(params.zeta * scale, params.zeta_bounds.min,
                           params.zeta_bounds.max);
  params.delta = std::clamp(params.delta * scale, params.delta_bounds.min,
                            params.delta_bounds.max);
  return params;
}

namespace {

struct RemovalCandidate {
  double value = 0.0;
  ConnectionRef ref;
  std::size_t flat_index = 0;
};

// Smallest value first, ties toward the smaller (layer, source, target);
// every layer keeps its last surviving connection.
void pick_smallest(std::vector<RemovalCandidate>& candidates, std::size_t quota,
                   std::vector<std::size_t> per_layer_remaining,
                   std::vector<ConnectionRef>& removals,
                   std::vector<std::size_t>& removed_indices) {
  std::sort(candidates.begin(), candidates.end(),
            [](const RemovalCandidate& a, const RemovalCandidate& b) {
              return std::tie(a.value, a.ref) < std::tie(b.value, b.ref);
            });
  for (const auto& cand : candidates) {
    if (removals.size() >= quota) break;
    auto& left = per_layer_remaining[static_cast<std::size_t>(cand.ref.layer)];
    if (left <= 1) continue;
    --left;
    removals.push_back(cand.ref);
    removed_indices.push_back(cand.flat_index);
  }
}

std::size_t flat_index(const TopologyMask& mask, const std::vector<std::size_t>& offsets,
                       const ConnectionRef& ref) {
  const auto& pairs = mask.layers[static_cast<std::size_t>(ref.layer)];
  const NodePair key{ref.source, ref.target};
  const auto it = std::lower_bound(pairs.begin(), pairs.end(), key);
  if (it == pairs.end() || *it != key) {
    throw ConsistencyError("connection is not active");
  }
  return offsets[static_cast<std::size_t>(ref.layer)] +
         static_cast<std::size_t>(it - pairs.begin());
}

std::uint64_t node_key(std::int32_t layer, std::int32_t index) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(layer)) << 32) |
         static_cast<std::uint32_t>(index);
}

}  // namespace

EpochEvolutionReport evolve_epoch(SparseNetwork& net, Strategy strategy,
                                  const EvolutionParams& params, const EvolveContext& ctx,
                                  std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  params.validate();

  EpochEvolutionReport report;
  report.strategy = strategy_name(strategy);
  report.params_before = params;
  report.params_after = params;

  const auto finish = [&]() {
    report.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  };

  if (strategy == Strategy::dense) {
    finish();
    return report;
  }
  if (strategy == Strategy::path_weight &&
      (ctx.feature_norms == nullptr || ctx.feature_norms->batches_seen() == 0)) {
    throw ParameterError("path_weight evolution needs updated feature norms");
  }
  if (strategy == Strategy::sensitivity &&
      (ctx.sensitivity == nullptr || ctx.sensitivity->batch_count() == 0)) {
    throw ParameterError("sensitivity evolution needs an accumulated epoch");
  }

  const TopologyMask& mask = net.mask();
  const int W = net.weight_layer_count();
  std::vector<std::size_t> offsets(static_cast<std::size_t>(W), 0);
  for (int l = 1; l < W; ++l) {
    offsets[static_cast<std::size_t>(l)] =
        offsets[static_cast<std::size_t>(l) - 1] + mask.layers[static_cast<std::size_t>(l) - 1].size();
  }
  std::vector<std::size_t> per_layer_remaining(static_cast<std::size_t>(W));
  for (int l = 0; l < W; ++l) {
    per_layer_remaining[static_cast<std::size_t>(l)] = mask.layers[static_cast<std::size_t>(l)].size();
  }

  // Pre-removal importance values in mask order (the strategy's own measure).
  std::vector<double> values;
  values.reserve(mask.active_count());
  std::vector<std::vector<double>> sensitivity_values;
  if (strategy == Strategy::sensitivity) {
    sensitivity_values = connection_sensitivity(*ctx.sensitivity, net, ctx.sensitivity_form);
  }
  for (int l = 0; l < W; ++l) {
    const auto weights = net.weights(l);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      switch (strategy) {
        case Strategy::set:
          values.push_back(std::abs(weights[i]));
          break;
        case Strategy::path_weight:
          values.push_back(normalized_weight(weights[i], l, *ctx.feature_norms));
          break;
        case Strategy::sensitivity:
          values.push_back(sensitivity_values[static_cast<std::size_t>(l)][i]);
          break;
        case Strategy::dense:
          break;
      }
    }
  }

  // Selection.
  std::vector<ConnectionRef> removals;
  std::vector<std::size_t> removed_indices;
  if (strategy == Strategy::path_weight) {
    const double total_paths = count_paths(mask);
    if (total_paths > 0.0) {
      const double poolf = params.lambda * total_paths;
      const std::size_t pool = poolf >= static_cast<double>(ctx.path_cap)
                                   ? ctx.path_cap
                                   : static_cast<std::size_t>(std::ceil(poolf));
      const auto paths = k_weakest_paths(net, *ctx.feature_norms, pool);
      std::vector<ConnectionRef> member_union;
      member_union.reserve(paths.size() * static_cast<std::size_t>(W));
      for (const auto& path : paths) {
        for (int l = 0; l < W; ++l) member_union.push_back(path.connection(l));
      }
      std::sort(member_union.begin(), member_union.end());
      member_union.erase(std::unique(member_union.begin(), member_union.end()),
                         member_union.end());

      std::vector<RemovalCandidate> candidates;
      candidates.reserve(member_union.size());
      for (const auto& ref : member_union) {
        const std::size_t idx = flat_index(mask, offsets, ref);
        candidates.push_back({values[idx], ref, idx});
      }
      const auto quota = static_cast<std::size_t>(
          std::ceil(params.zeta * static_cast<double>(member_union.size())));
      pick_smallest(candidates, quota, per_layer_remaining, removals, removed_indices);
    }
  } else if (strategy == Strategy::sensitivity) {
    removals = select_removals_by_sensitivity(sensitivity_values, mask, params.zeta);
    removed_indices.reserve(removals.size());
    for (const auto& ref : removals) removed_indices.push_back(flat_index(mask, offsets, ref));
  } else {  // set
    std::vector<RemovalCandidate> candidates;
    candidates.reserve(mask.active_count());
    std::size_t flat = 0;
    for (int l = 0; l < W; ++l) {
      const auto& pairs = mask.layers[static_cast<std::size_t>(l)];
      for (std::size_t i = 0; i < pairs.size(); ++i, ++flat) {
        candidates.push_back({values[flat], {l, pairs[i].source, pairs[i].target}, flat});
      }
    }
    const auto quota = static_cast<std::size_t>(
        std::ceil(params.zeta * static_cast<double>(mask.active_count())));
    pick_smallest(candidates, quota, per_layer_remaining, removals, removed_indices);
  }

  std::tie(report.c_prim, report.c_sec) = compute_criteria(values, removed_indices);

  // Node weights for sensitivity regrowth come from the surviving
  // connections, so they are accumulated against the pre-removal alignment.
  std::vector<std::unordered_set<std::uint64_t>> removed_keys(static_cast<std::size_t>(W));
  for (const auto& ref : removals) {
    removed_keys[static_cast<std::size_t>(ref.layer)].insert(pair_key(ref.source, ref.target));
  }
  std::vector<std::vector<double>> node_weights;
  if (strategy == Strategy::sensitivity) {
    node_weights.resize(mask.layer_sizes.size());
    for (std::size_t k = 0; k < mask.layer_sizes.size(); ++k) {
      node_weights[k].assign(static_cast<std::size_t>(mask.layer_sizes[k]), 0.0);
    }
    for (int l = 0; l < W; ++l) {
      const auto& pairs = mask.layers[static_cast<std::size_t>(l)];
      const auto& svals = sensitivity_values[static_cast<std::size_t>(l)];
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (removed_keys[static_cast<std::size_t>(l)].count(
                pair_key(pairs[i].source, pairs[i].target))) {
          continue;
        }
        node_weights[static_cast<std::size_t>(l)][static_cast<std::size_t>(pairs[i].source)] +=
            svals[i];
      }
    }
  }

  std::sort(removals.begin(), removals.end());
  if (!removals.empty()) net.erase_connections(removals);
  report.removed = removals;

  // Regrowth.
  const auto removed_count = removals.size();
  auto n_add = static_cast<std::size_t>(
      std::llround(params.delta * static_cast<double>(removed_count)));
  if (ctx.budget_preserving) {
    const std::size_t free_slots = net.budget() - net.active_count();
    n_add = std::min(n_add, free_slots);
  }

  std::vector<ConnectionRef> additions;
  if (n_add > 0) {
    // Eligible sources: nodes below the output layer with a free outgoing
    // slot; slots vacated this step stay blocked until the next epoch.
    std::vector<std::vector<std::size_t>> out_used(static_cast<std::size_t>(W));
    for (int l = 0; l < W; ++l) {
      out_used[static_cast<std::size_t>(l)].assign(
          static_cast<std::size_t>(mask.layer_sizes[static_cast<std::size_t>(l)]), 0);
      for (const auto& pair : mask.layers[static_cast<std::size_t>(l)]) {
        ++out_used[static_cast<std::size_t>(l)][static_cast<std::size_t>(pair.source)];
      }
    }
    for (const auto& ref : removals) {
      ++out_used[static_cast<std::size_t>(ref.layer)][static_cast<std::size_t>(ref.source)];
    }
    std::vector<NodeId> eligible;
    for (int l = 0; l < W; ++l) {
      const auto width = static_cast<std::size_t>(mask.layer_sizes[static_cast<std::size_t>(l) + 1]);
      for (std::int32_t s = 0; s < mask.layer_sizes[static_cast<std::size_t>(l)]; ++s) {
        if (out_used[static_cast<std::size_t>(l)][static_cast<std::size_t>(s)] < width) {
          eligible.push_back({l, s});
        }
      }
    }

    if (!eligible.empty()) {
      std::vector<double> weights;
      if (strategy == Strategy::path_weight) {
        const auto table = node_importance_all(net, *ctx.feature_norms);
        weights = regrowth_distribution(table, eligible, params.delta);
      } else if (strategy == Strategy::sensitivity) {
        weights.reserve(eligible.size());
        double total = 0.0;
        for (const auto& id : eligible) {
          const double v = node_weights[static_cast<std::size_t>(id.layer)]
                                       [static_cast<std::size_t>(id.index)];
          weights.push_back(v);
          total += v;
        }
        if (!(total > 0.0)) weights.assign(eligible.size(), 1.0);
      } else {
        weights.assign(eligible.size(), 1.0);
      }

      double total = 0.0;
      for (double w : weights) total += w;
      if (!(total > 0.0)) weights.assign(eligible.size(), 1.0);

      // Sampling is proportional among sources that still have a free target;
      // a source found saturated is dropped and the rest renormalized, which
      // leaves the conditional distribution unchanged but never strands the
      // remaining quota behind a heavy saturated node.
      std::vector<double> cumulative(weights.size());
      double running = 0.0;
      const auto rebuild = [&] {
        running = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
          running += weights[i];
          cumulative[i] = running;
        }
      };
      rebuild();

      Rng sampler(derive_seed(seed, 0));
      std::unordered_map<std::uint64_t, std::vector<std::int32_t>> free_targets;
      const auto free_list_of = [&](const NodeId& id) -> std::vector<std::int32_t>& {
        const auto key = node_key(id.layer, id.index);
        auto it = free_targets.find(key);
        if (it != free_targets.end()) return it->second;
        std::vector<std::int32_t> list;
        const auto l = static_cast<std::size_t>(id.layer);
        for (std::int32_t t = 0; t < mask.layer_sizes[l + 1]; ++t) {
          if (mask.contains(id.layer, id.index, t)) continue;
          if (removed_keys[l].count(pair_key(id.index, t))) continue;
          list.push_back(t);
        }
        return free_targets.emplace(key, std::move(list)).first->second;
      };

      additions.reserve(n_add);
      const std::size_t max_attempts = 100 * n_add;
      std::size_t attempts = 0;
      while (additions.size() < n_add && attempts < max_attempts && running > 0.0) {
        ++attempts;
        const double u = sampler.uniform() * running;
        const auto pick = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        if (pick >= eligible.size()) continue;
        const NodeId source = eligible[pick];
        auto& free_list = free_list_of(source);
        if (free_list.empty()) {
          weights[pick] = 0.0;
          rebuild();
          continue;
        }
        const std::size_t j = sampler.uniform_index(free_list.size());
        const std::int32_t target = free_list[static_cast<std::size_t>(j)];
        free_list.erase(free_list.begin() + static_cast<std::ptrdiff_t>(j));
        if (free_list.empty()) {
          weights[pick] = 0.0;
          rebuild();
        }
        additions.push_back({source.layer, source.index, target});
      }
    }
  }

  std::sort(additions.begin(), additions.end());
  if (!ctx.budget_preserving &&
      net.active_count() + additions.size() > net.budget()) {
    net.set_budget(net.active_count() + additions.size());
  }
  if (!additions.empty()) add_connections(net, additions, derive_seed(seed, 1));
  report.added = additions;

  finish();
  return report;
}

}  // namespace senn
