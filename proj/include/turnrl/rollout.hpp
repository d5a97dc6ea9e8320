#pragma once

#include <cstdint>
#include <vector>

#include "turnrl/envs.hpp"
#include "turnrl/policy.hpp"

namespace turnrl {

enum class Mode { kExact, kSampled };

struct Trajectory {
  int s0 = 0;
  std::vector<int> actions;                  // length T, kNoOp when padded
  std::vector<double> behavior_log_probs;    // 0 on padded turns
  double reward = 0.0;
  // 1/G in sampled mode, path probability in exact mode.
  double weight = 0.0;
};

struct Group {
  int s0 = 0;
  // Share of the batch: 1/B when sampled, d(s0) when enumerated.
  double weight = 0.0;
  std::vector<Trajectory> trajectories;
  double mean_reward = 0.0;
};

// Weighted mean of member rewards; weights are normalized by their sum.
double weighted_mean_reward(const std::vector<Trajectory>& trajectories);

std::vector<Group> collect_batch(const TreeBanditSpec& spec, const TreePolicy& policy,
                                 int batch_size, int group_size, std::uint64_t seed);
// One group per initial state holding every episode with its probability.
std::vector<Group> enumerate_batch(const TreeBanditSpec& spec, const TreePolicy& policy,
                                   std::size_t cap = kExactPathCap);

struct TurnSample {
  int group = 0;
  int trajectory = 0;
  HistoryKey key;
  int action = kNoOp;
  bool is_placeholder = false;
};

struct TurnPool {
  int turn = 1;
  std::vector<TurnSample> samples;  // one per trajectory, in batch order
};

std::vector<TurnPool> build_turn_pools(const std::vector<Group>& groups, int horizon);

struct MdpStep {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  double behavior_log_prob = 0.0;
};

struct MdpTrajectory {
  int s0 = 0;
  std::vector<MdpStep> steps;
  double total_reward = 0.0;  // undiscounted
  double weight = 0.0;
};

struct MdpGroup {
  int s0 = 0;
  double weight = 0.0;
  std::vector<MdpTrajectory> trajectories;
  double mean_reward = 0.0;
};

std::vector<MdpGroup> collect_mdp_batch(const FiniteMdpSpec& spec, const MdpPolicy& policy,
                                        int batch_size, int group_size, std::uint64_t seed);
// One group per initial state with positive probability, holding every
// state-action sequence with its probability.
std::vector<MdpGroup> enumerate_mdp_batch(const FiniteMdpSpec& spec, const MdpPolicy& policy,
                                          std::size_t cap = kExactPathCap);

}  // namespace turnrl
