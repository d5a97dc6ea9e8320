#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace turnrl {

// Marks a padded turn after an episode has ended early.
inline constexpr int kNoOp = -1;

// Hard cap on exhaustively enumerable trajectories (tree paths or MDP
// state-action sequences).
inline constexpr std::size_t kExactPathCap = 100000;

// Decision context of a tree bandit: initial state plus the actions taken so
// far. The turn being decided is prefix.size() + 1.
struct HistoryKey {
  int s0 = 0;
  std::vector<int> prefix;

  int turn() const { return static_cast<int>(prefix.size()) + 1; }
  friend auto operator<=>(const HistoryKey&, const HistoryKey&) = default;
};

struct TerminalPrefix {
  int s0 = 0;
  std::vector<int> prefix;
  friend bool operator==(const TerminalPrefix&, const TerminalPrefix&) = default;
};

// Multi-turn contextual bandit: T actions chosen in sequence, one team reward
// paid at the end. Rewards live in a dense table per initial state, indexed by
// the mixed-radix code of the full action path (first turn most significant,
// so index order is lexicographic path order).
//
// An episode may end early: once its history matches a terminal prefix, the
// remaining turns are no-op placeholders. A padded path is looked up with
// action 0 in each padded slot; the other completions of a terminal prefix
// are unreachable.
struct TreeBanditSpec {
  int num_initial_states = 1;
  int horizon = 1;
  std::vector<int> actions_per_turn;
  std::vector<std::vector<double>> reward_table;  // [s0][path index]
  std::vector<double> initial_distribution;
  double reward_bound = 0.0;
  std::vector<TerminalPrefix> terminal_prefixes;

  std::size_t paths_per_state() const;
  std::size_t path_index(std::span<const int> actions) const;
  std::vector<int> path_actions(std::size_t index) const;
  double reward(int s0, std::span<const int> actions) const;
  // True when the history (s0, prefix) ends the episode.
  bool ends_after(int s0, std::span<const int> prefix) const;
  // Number of real (non-placeholder) turns on the episode that follows
  // `actions`; actions past that point are ignored.
  int episode_length(int s0, std::span<const int> actions) const;

  friend bool operator==(const TreeBanditSpec&, const TreeBanditSpec&) = default;
};

// Throws std::invalid_argument naming the first violated invariant.
void validate(const TreeBanditSpec& spec);

struct TreeBanditShape {
  int min_states = 1;
  int max_states = 1;
  int min_turns = 2;
  int max_turns = 2;
  // When non-empty, fixes the per-turn action counts (and T).
  std::vector<int> actions_per_turn;
  int min_actions = 2;
  int max_actions = 2;
  double reward_min = 0.0;
  double reward_max = 1.0;
  // Probability that a non-final history becomes a terminal prefix.
  double termination_probability = 0.0;
  bool random_initial_distribution = false;
};

TreeBanditSpec generate_tree_bandit(std::uint64_t seed, const TreeBanditShape& shape);

struct PathEntry {
  std::vector<int> actions;
  double reward = 0.0;
};

// All histories at which a real decision is taken (placeholder turns are
// skipped), ordered by s0, then turn, then prefix lexicographically.
std::vector<HistoryKey> decision_histories(const TreeBanditSpec& spec);

// Every full path of the table for one initial state, in lexicographic order.
std::vector<PathEntry> enumerate_paths(const TreeBanditSpec& spec, int s0);
// Distinct episodes for one initial state, with kNoOp in padded turns.
std::vector<PathEntry> enumerate_episodes(const TreeBanditSpec& spec, int s0);

enum class RewardTiming {
  kEveryStep,
  // Reward only counts on the last step (terminal reward, as for a model
  // that is scored once per response).
  kFinalStep,
};

struct FiniteMdpSpec {
  int num_states = 1;
  int num_actions = 1;
  std::vector<std::vector<std::vector<double>>> transition;  // [s][a][s']
  std::vector<std::vector<double>> reward;                   // [s][a]
  int horizon = 1;
  double discount = 1.0;
  std::vector<double> initial_distribution;
  RewardTiming reward_timing = RewardTiming::kEveryStep;

  // Reward paid for (s, a) at time t under the timing rule.
  double step_reward(int s, int a, int t) const;

  friend bool operator==(const FiniteMdpSpec&, const FiniteMdpSpec&) = default;
};

void validate(const FiniteMdpSpec& spec);

struct FiniteMdpShape {
  int min_states = 2;
  int max_states = 2;
  int min_actions = 2;
  int max_actions = 2;
  int min_horizon = 2;
  int max_horizon = 2;
  double discount = 1.0;
  double reward_min = 0.0;
  double reward_max = 1.0;
  bool deterministic_transitions = false;
  bool random_initial_distribution = true;
  RewardTiming reward_timing = RewardTiming::kEveryStep;
};

FiniteMdpSpec generate_finite_mdp(std::uint64_t seed, const FiniteMdpShape& shape);

// Number of (s0, a0, s1, a1, ...) sequences an exact enumeration visits.
std::size_t mdp_trajectory_count(const FiniteMdpSpec& spec);

// Two-state counterexample for group-relative advantages under clipping.
// t=0: the start state s0 moves to s1 or back to s0 with probability 1/2
// each, whatever the action. t=1 (last step, terminal reward only): s1 pays
// 12 for a_good and 5 for a_bad; s0 pays -10 for both actions. Under the
// reference policy (a_good with probability 5/7 at s1) V(s1)=10 and
// V(s0)=0, so the true advantages at s1 are +2 and -5 while the group
// estimates are 12 and 5.
namespace degradation {
inline constexpr int kStart = 0;
inline constexpr int kBranch = 1;  // s1
inline constexpr int kGood = 0;
inline constexpr int kBad = 1;
inline constexpr double kReferenceGoodProb = 5.0 / 7.0;
}  // namespace degradation

FiniteMdpSpec build_degradation_mdp();

// View of a tree bandit as a finite MDP whose states are histories, with
// deterministic transitions and the team reward on the last step. Requires
// equal action counts on all turns and no early termination. State k is
// decision_histories(spec)[k].
FiniteMdpSpec token_view(const TreeBanditSpec& spec);

}  // namespace turnrl
