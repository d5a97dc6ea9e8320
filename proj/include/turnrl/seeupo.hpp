#pragma once

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "turnrl/envs.hpp"
#include "turnrl/policy.hpp"
#include "turnrl/random.hpp"
#include "turnrl/rollout.hpp"
#include "turnrl/updates.hpp"

namespace turnrl {

enum class UpdateOrder { kReverse, kNatural, kRandom };

std::string_view to_string(UpdateOrder order);
UpdateOrder parse_update_order(std::string_view name);

// Turns (1-based) in processing order; kRandom draws a permutation from rng.
std::vector<int> turn_sequence(UpdateOrder order, int horizon, Rng& rng);

// Running product of the already-processed turns' ratios times the joint
// advantage, one entry per trajectory in batch order.
struct MTable {
  std::vector<double> values;
  std::vector<int> processed_turns;
};

MTable init_M(const std::vector<Group>& groups, std::span<const double> advantages);

// Multiplies each entry by pi_after(a^t | h) / pi_start(a^t | h) for the
// pool's turn. Placeholder samples keep their value.
MTable update_M(MTable mtable, const TurnPool& pool, const TreePolicy& after,
                const TreePolicy& start);

// One unit per pool sample; placeholders become empty (masked) units.
std::vector<RatioUnit> turn_units(const TurnPool& pool, const MTable& mtable,
                                  std::span<const double> weights, const TreePolicy& policy);

struct TurnUpdateStats {
  double grad_norm = 0.0;
  double clip_fraction = 0.0;
  double mean_abs_m = 0.0;
};

// epochs_per_batch ascent steps on the clipped turn objective with ratios
// against the iteration-start snapshot.
TurnUpdateStats seeupo_turn_update(const TurnPool& pool, const MTable& mtable,
                                   std::span<const double> weights, TreePolicy& policy,
                                   const TreePolicy& start, const UpdateConfig& config,
                                   Optimizer& optimizer);

// Called after each turn's M update with the turn, the M table and the
// current policy.
using TurnObserver = std::function<void(int turn, const MTable&, const TreePolicy&)>;

IterationRow seeupo_iteration(const TreeBanditSpec& spec, TreePolicy& policy,
                              const RunSettings& settings, UpdateOrder order, int iteration,
                              Optimizer& optimizer, const TurnObserver& observer = {},
                              std::vector<AdvantageRecord>* advantages_out = nullptr);

ExperimentReport run_seeupo(const TreeBanditSpec& spec, TreePolicy& policy,
                            const RunSettings& settings, UpdateOrder order);

}  // namespace turnrl
