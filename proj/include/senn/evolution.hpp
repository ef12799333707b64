#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "senn/network.hpp"
#include "senn/path_analysis.hpp"
#include "senn/sensitivity.hpp"

namespace senn {

enum class Strategy { dense, set, path_weight, sensitivity };

std::string strategy_name(Strategy strategy);
Strategy parse_strategy(const std::string& name);

struct ParamBounds {
  double min = 0.0;
  double max = 0.0;
};

// lambda: fraction of weakest paths inspected; zeta: fraction of connections
// removed; delta: regrowth multiplier. Each parameter is clamped to its
// bounds after every time-varying update.
struct EvolutionParams {
  double lambda = 0.05;
  double zeta = 0.3;
  double delta = 1.0;
  ParamBounds lambda_bounds{1e-4, 0.9};
  ParamBounds zeta_bounds{1e-4, 0.9};
  ParamBounds delta_bounds{0.1, 10.0};
  bool time_varying = false;

  void validate() const;
};

enum class ParamMode { fixed, time_varying };

// fixed: lambda 0.05, zeta 0.3, delta 1.0; time-varying starts larger:
// lambda 0.2, zeta 0.5, delta 2.0.
EvolutionParams initial_params(ParamMode mode);

// Controller constants, K2 < 1 < K1 and K3 < K4 < 1.
struct ControllerConstants {
  double k1 = 2.0;
  double k2 = 0.5;
  double k3 = 0.1;
  double k4 = 0.5;

  void validate() const;
};

struct EpochEvolutionReport {
  std::string strategy;
  std::vector<ConnectionRef> removed;
  std::vector<ConnectionRef> added;
  double c_prim = 0.0;  // mean importance over all pre-removal active connections
  double c_sec = 0.0;   // mean importance over the removed set (0 when empty)
  EvolutionParams params_before;
  EvolutionParams params_after;
  double wall_ms = 0.0;
};

// Strategy-specific inputs for one evolution step. path_weight requires
// feature norms with at least one update; sensitivity requires an accumulator
// with at least one batch.
struct EvolveContext {
  const FeatureNorms* feature_norms = nullptr;
  const SensitivityAccumulator* sensitivity = nullptr;
  SensitivityForm sensitivity_form = SensitivityForm::paper;
  std::size_t path_cap = 10000;    // ceiling on the weakest-path pool
  bool budget_preserving = true;   // when off, the budget grows with additions
};

// One epoch-end prune-and-regrow step:
//   set          remove the ceil(zeta * active) smallest-|w| connections
//   path_weight  take k = min(ceil(lambda * M), path_cap) weakest paths and
//                remove the ceil(zeta * |union|) smallest normalized weights
//                among their connections
//   sensitivity  remove per select_removals_by_sensitivity
//   dense        no-op
// then regrow n_add = min(round(delta * removed), free budget slots)
// connections: source nodes sampled from the strategy's node distribution
// (node importance, node sensitivity, or uniform for set), target uniform
// among the source's free next-layer targets. Connections removed in this
// step are not re-added in it. The last surviving connection of a layer is
// never removed.
EpochEvolutionReport evolve_epoch(SparseNetwork& net, Strategy strategy,
                                  const EvolutionParams& params,
                                  const EvolveContext& ctx, std::uint64_t seed);

// C_prim = mean over all values, C_sec = mean over the removed subset
// (0 when nothing was removed).
std::pair<double, double> compute_criteria(const std::vector<double>& importance_values,
                                           const std::vector<std::size_t>& removed_indices);

// One controller step per parameter rho in {lambda, zeta, delta}:
//   rho <- K1 * rho   if C_sec < K3 * C_prim
//   rho <- K2 * rho   if C_sec > K4 * C_prim
//   rho unchanged     otherwise
// then clamp to bounds. Callers apply this only when time_varying is on.
EvolutionParams update_params(EvolutionParams params, const ControllerConstants& constants,
                              double c_prim, double c_sec);

}  // namespace senn
