#pragma once

#include <cstdint>
#include <vector>

#include "turnrl/envs.hpp"
#include "turnrl/policy.hpp"
#include "turnrl/updates.hpp"

namespace turnrl {

inline constexpr std::uint64_t kDefaultSuiteSeed = 2024;

// Random finite MDPs with 2..5 states, 2..3 actions and horizon 2..4.
std::vector<FiniteMdpSpec> mdp_suite(std::uint64_t seed, int count,
                                     RewardTiming timing = RewardTiming::kEveryStep,
                                     double discount = 1.0);

// Random tree bandits with T in 1..3, 2..4 actions per turn, 1..3 initial
// states; every fifth instance has early termination.
std::vector<TreeBanditSpec> tree_bandit_suite(std::uint64_t seed, int count);

// Instances alternate T=2 and T=3 with 2..4 actions per turn and 1..3 initial
// states. Action counts are redrawn until every initial state has at most
// kBruteForceCap deterministic policies. Every fifth instance has early
// termination.
std::vector<TreeBanditSpec> seeupo_suite(std::uint64_t seed, int count = 20);

// Single-turn bandits.
std::vector<TreeBanditSpec> single_turn_suite(std::uint64_t seed, int count);

// N(0, sigma^2) logits, seeded by (seed, index).
MdpPolicy suite_policy(const FiniteMdpSpec& spec, std::uint64_t seed, int index,
                       double sigma = 1.0);
TreePolicy suite_policy(const TreeBanditSpec& spec, std::uint64_t seed, int index,
                        double sigma = 1.0);

// Step size, epochs and normalization under which the SeeUPO suite checks run.
UpdateConfig seeupo_suite_config();

}  // namespace turnrl
