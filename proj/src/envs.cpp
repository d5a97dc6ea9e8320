#include "turnrl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "turnrl/random.hpp"

namespace turnrl {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_distribution(const std::vector<double>& p, std::size_t n,
                        const std::string& name) {
  require(p.size() == n, name + ": wrong length");
  double total = 0.0;
  for (double x : p) {
    require(std::isfinite(x) && x >= 0.0, name + ": negative or non-finite entry");
    total += x;
  }
  require(std::abs(total - 1.0) <= 1e-12, name + ": does not sum to 1");
}

std::vector<double> random_simplex_point(Rng& rng, int n) {
  std::vector<double> w(n);
  double total = 0.0;
  for (double& x : w) {
    x = 0.05 + rng.uniform();
    total += x;
  }
  for (double& x : w) x /= total;
  return w;
}

// Visits every prefix of the given length in lexicographic order.
template <typename Fn>
void for_each_prefix(const std::vector<int>& actions_per_turn, int length, Fn&& fn) {
  std::vector<int> prefix(length, 0);
  while (true) {
    fn(prefix);
    int i = length - 1;
    while (i >= 0 && ++prefix[i] == actions_per_turn[i]) prefix[i--] = 0;
    if (i < 0) return;
  }
}

// True when some nonempty prefix of `actions` is a terminal prefix.
bool ended_within(const TreeBanditSpec& spec, int s0, std::span<const int> actions) {
  if (spec.terminal_prefixes.empty()) return false;
  for (std::size_t len = 1; len <= actions.size(); ++len) {
    if (spec.ends_after(s0, actions.first(len))) return true;
  }
  return false;
}

}  // namespace

std::size_t TreeBanditSpec::paths_per_state() const {
  std::size_t n = 1;
  for (int a : actions_per_turn) n *= static_cast<std::size_t>(a);
  return n;
}

std::size_t TreeBanditSpec::path_index(std::span<const int> actions) const {
  if (actions.size() != actions_per_turn.size())
    throw std::out_of_range("path_index: path length differs from horizon");
  std::size_t index = 0;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    const int a = actions[t] == kNoOp ? 0 : actions[t];
    if (a < 0 || a >= actions_per_turn[t]) throw std::out_of_range("path_index: action out of range");
    index = index * actions_per_turn[t] + a;
  }
  return index;
}

std::vector<int> TreeBanditSpec::path_actions(std::size_t index) const {
  std::vector<int> actions(actions_per_turn.size());
  for (std::size_t t = actions.size(); t-- > 0;) {
    actions[t] = static_cast<int>(index % actions_per_turn[t]);
    index /= actions_per_turn[t];
  }
  return actions;
}

double TreeBanditSpec::reward(int s0, std::span<const int> actions) const {
  if (s0 < 0 || s0 >= num_initial_states) throw std::out_of_range("reward: bad initial state");
  return reward_table[s0][path_index(actions)];
}

bool TreeBanditSpec::ends_after(int s0, std::span<const int> prefix) const {
  for (const auto& tp : terminal_prefixes) {
    if (tp.s0 == s0 && std::ranges::equal(tp.prefix, prefix)) return true;
  }
  return false;
}

int TreeBanditSpec::episode_length(int s0, std::span<const int> actions) const {
  if (!terminal_prefixes.empty()) {
    const int limit = std::min<int>(horizon, static_cast<int>(actions.size()) + 1);
    for (int len = 1; len < limit; ++len) {
      if (ends_after(s0, actions.first(len))) return len;
    }
  }
  return horizon;
}

void validate(const TreeBanditSpec& spec) {
  require(spec.num_initial_states >= 1, "tree bandit: need at least one initial state");
  require(spec.horizon >= 1, "tree bandit: horizon must be >= 1");
  require(static_cast<int>(spec.actions_per_turn.size()) == spec.horizon,
          "tree bandit: actions_per_turn length must equal horizon");
  double paths = 1.0;
  for (int a : spec.actions_per_turn) {
    require(a >= 1, "tree bandit: action counts must be positive");
    paths *= a;
  }
  require(paths * spec.num_initial_states <= static_cast<double>(kExactPathCap),
          "tree bandit: more than 1e5 paths");
  check_distribution(spec.initial_distribution, spec.num_initial_states,
                     "tree bandit initial_distribution");
  require(std::isfinite(spec.reward_bound) && spec.reward_bound >= 0.0,
          "tree bandit: reward_bound must be finite and nonnegative");
  require(static_cast<int>(spec.reward_table.size()) == spec.num_initial_states,
          "tree bandit: reward_table needs one row per initial state");
  for (const auto& row : spec.reward_table) {
    require(row.size() == spec.paths_per_state(), "tree bandit: reward_table row is not total");
    for (double r : row) {
      require(std::isfinite(r) && std::abs(r) <= spec.reward_bound,
              "tree bandit: reward exceeds reward_bound");
    }
  }
  for (std::size_t i = 0; i < spec.terminal_prefixes.size(); ++i) {
    const auto& tp = spec.terminal_prefixes[i];
    require(tp.s0 >= 0 && tp.s0 < spec.num_initial_states, "terminal prefix: bad initial state");
    const int len = static_cast<int>(tp.prefix.size());
    require(len >= 1 && len < spec.horizon, "terminal prefix: length must be in [1, T)");
    for (int t = 0; t < len; ++t) {
      require(tp.prefix[t] >= 0 && tp.prefix[t] < spec.actions_per_turn[t],
              "terminal prefix: action out of range");
    }
    for (std::size_t j = 0; j < spec.terminal_prefixes.size(); ++j) {
      const auto& other = spec.terminal_prefixes[j];
      if (i == j || other.s0 != tp.s0 || other.prefix.size() > tp.prefix.size()) continue;
      require(!std::equal(other.prefix.begin(), other.prefix.end(), tp.prefix.begin()),
              "terminal prefix: duplicate or extends another terminal prefix");
    }
  }
}

TreeBanditSpec generate_tree_bandit(std::uint64_t seed, const TreeBanditShape& shape) {
  Rng rng = Rng::derive(seed, "tree_bandit.shape");
  TreeBanditSpec spec;
  if (!shape.actions_per_turn.empty()) {
    spec.actions_per_turn = shape.actions_per_turn;
    spec.horizon = static_cast<int>(shape.actions_per_turn.size());
  } else {
    require(shape.min_turns >= 1 && shape.max_turns >= shape.min_turns,
            "tree bandit shape: T must be >= 1");
    require(shape.min_actions >= 1 && shape.max_actions >= shape.min_actions,
            "tree bandit shape: action counts must be positive");
    spec.horizon = rng.uniform_int(shape.min_turns, shape.max_turns);
    for (int t = 0; t < spec.horizon; ++t) {
      spec.actions_per_turn.push_back(rng.uniform_int(shape.min_actions, shape.max_actions));
    }
  }
  require(spec.horizon >= 1, "tree bandit shape: T must be >= 1");
  for (int a : spec.actions_per_turn) require(a >= 1, "tree bandit shape: zero action count");
  require(shape.min_states >= 1 && shape.max_states >= shape.min_states,
          "tree bandit shape: state count must be positive");
  require(shape.reward_max >= shape.reward_min, "tree bandit shape: empty reward range");
  spec.num_initial_states = rng.uniform_int(shape.min_states, shape.max_states);
  require(static_cast<double>(spec.paths_per_state()) * spec.num_initial_states <=
              static_cast<double>(kExactPathCap),
          "tree bandit shape: more than 1e5 paths");

  Rng init_rng = Rng::derive(seed, "tree_bandit.initial");
  if (shape.random_initial_distribution) {
    spec.initial_distribution = random_simplex_point(init_rng, spec.num_initial_states);
  } else {
    spec.initial_distribution.assign(spec.num_initial_states, 1.0 / spec.num_initial_states);
  }

  Rng reward_rng = Rng::derive(seed, "tree_bandit.rewards");
  spec.reward_table.assign(spec.num_initial_states, std::vector<double>(spec.paths_per_state()));
  for (auto& row : spec.reward_table) {
    for (double& r : row) {
      r = reward_rng.uniform(shape.reward_min, shape.reward_max);
      spec.reward_bound = std::max(spec.reward_bound, std::abs(r));
    }
  }

  if (shape.termination_probability > 0.0) {
    Rng end_rng = Rng::derive(seed, "tree_bandit.termination");
    for (int s0 = 0; s0 < spec.num_initial_states; ++s0) {
      for (int len = 1; len < spec.horizon; ++len) {
        for_each_prefix(spec.actions_per_turn, len, [&](const std::vector<int>& prefix) {
          if (ended_within(spec, s0, prefix)) return;
          if (end_rng.uniform() < shape.termination_probability) {
            spec.terminal_prefixes.push_back({s0, prefix});
          }
        });
      }
    }
  }
  validate(spec);
  return spec;
}

std::vector<HistoryKey> decision_histories(const TreeBanditSpec& spec) {
  std::vector<HistoryKey> keys;
  for (int s0 = 0; s0 < spec.num_initial_states; ++s0) {
    for (int t = 1; t <= spec.horizon; ++t) {
      for_each_prefix(spec.actions_per_turn, t - 1, [&](const std::vector<int>& prefix) {
        if (ended_within(spec, s0, prefix)) return;
        keys.push_back({s0, prefix});
      });
    }
  }
  return keys;
}

std::vector<PathEntry> enumerate_paths(const TreeBanditSpec& spec, int s0) {
  if (s0 < 0 || s0 >= spec.num_initial_states) throw std::out_of_range("enumerate_paths: bad state");
  std::vector<PathEntry> out;
  out.reserve(spec.paths_per_state());
  for (std::size_t i = 0; i < spec.paths_per_state(); ++i) {
    out.push_back({spec.path_actions(i), spec.reward_table[s0][i]});
  }
  return out;
}

std::vector<PathEntry> enumerate_episodes(const TreeBanditSpec& spec, int s0) {
  if (s0 < 0 || s0 >= spec.num_initial_states) throw std::out_of_range("enumerate_episodes: bad state");
  std::vector<PathEntry> out;
  std::vector<int> path(spec.horizon, kNoOp);
  auto recurse = [&](auto&& self, int depth) -> void {
    if (depth == spec.horizon ||
        (depth > 0 && spec.ends_after(s0, std::span<const int>(path).first(depth)))) {
      out.push_back({path, spec.reward(s0, path)});
      return;
    }
    for (int a = 0; a < spec.actions_per_turn[depth]; ++a) {
      path[depth] = a;
      self(self, depth + 1);
    }
    path[depth] = kNoOp;
  };
  recurse(recurse, 0);
  return out;
}

double FiniteMdpSpec::step_reward(int s, int a, int t) const {
  if (reward_timing == RewardTiming::kFinalStep && t != horizon - 1) return 0.0;
  return reward[s][a];
}

void validate(const FiniteMdpSpec& spec) {
  require(spec.num_states >= 1 && spec.num_actions >= 1, "mdp: need states and actions");
  require(spec.horizon >= 1, "mdp: horizon must be >= 1");
  require(spec.discount >= 0.0 && spec.discount <= 1.0, "mdp: discount outside [0, 1]");
  require(static_cast<int>(spec.transition.size()) == spec.num_states, "mdp: transition shape");
  require(static_cast<int>(spec.reward.size()) == spec.num_states, "mdp: reward shape");
  for (int s = 0; s < spec.num_states; ++s) {
    require(static_cast<int>(spec.transition[s].size()) == spec.num_actions, "mdp: transition shape");
    require(static_cast<int>(spec.reward[s].size()) == spec.num_actions, "mdp: reward shape");
    for (int a = 0; a < spec.num_actions; ++a) {
      check_distribution(spec.transition[s][a], spec.num_states, "mdp transition row");
      require(std::isfinite(spec.reward[s][a]), "mdp: non-finite reward");
    }
  }
  check_distribution(spec.initial_distribution, spec.num_states, "mdp initial_distribution");
}

FiniteMdpSpec generate_finite_mdp(std::uint64_t seed, const FiniteMdpShape& shape) {
  require(shape.min_states >= 1 && shape.max_states >= shape.min_states, "mdp shape: states");
  require(shape.min_actions >= 1 && shape.max_actions >= shape.min_actions, "mdp shape: actions");
  require(shape.min_horizon >= 1 && shape.max_horizon >= shape.min_horizon, "mdp shape: horizon");
  require(shape.reward_max >= shape.reward_min, "mdp shape: empty reward range");
  Rng rng = Rng::derive(seed, "finite_mdp.shape");
  FiniteMdpSpec spec;
  spec.num_states = rng.uniform_int(shape.min_states, shape.max_states);
  spec.num_actions = rng.uniform_int(shape.min_actions, shape.max_actions);
  spec.horizon = rng.uniform_int(shape.min_horizon, shape.max_horizon);
  spec.discount = shape.discount;
  spec.reward_timing = shape.reward_timing;

  Rng trans_rng = Rng::derive(seed, "finite_mdp.transition");
  spec.transition.assign(spec.num_states, std::vector<std::vector<double>>(spec.num_actions));
  for (auto& rows : spec.transition) {
    for (auto& row : rows) {
      if (shape.deterministic_transitions) {
        row.assign(spec.num_states, 0.0);
        row[trans_rng.uniform_int(0, spec.num_states - 1)] = 1.0;
      } else {
        row = random_simplex_point(trans_rng, spec.num_states);
      }
    }
  }
  Rng reward_rng = Rng::derive(seed, "finite_mdp.rewards");
  spec.reward.assign(spec.num_states, std::vector<double>(spec.num_actions));
  for (auto& row : spec.reward) {
    for (double& r : row) r = reward_rng.uniform(shape.reward_min, shape.reward_max);
  }
  Rng init_rng = Rng::derive(seed, "finite_mdp.initial");
  if (shape.random_initial_distribution) {
    spec.initial_distribution = random_simplex_point(init_rng, spec.num_states);
  } else {
    spec.initial_distribution.assign(spec.num_states, 1.0 / spec.num_states);
  }
  validate(spec);
  return spec;
}

std::size_t mdp_trajectory_count(const FiniteMdpSpec& spec) {
  const double per_step = static_cast<double>(spec.num_states) * spec.num_actions;
  const double total = std::pow(per_step, spec.horizon);
  if (total >= 1e18) return static_cast<std::size_t>(-1);
  return static_cast<std::size_t>(total);
}

FiniteMdpSpec build_degradation_mdp() {
  using namespace degradation;
  FiniteMdpSpec spec;
  spec.num_states = 2;
  spec.num_actions = 2;
  spec.horizon = 2;
  spec.discount = 1.0;
  spec.reward_timing = RewardTiming::kFinalStep;
  spec.transition.assign(2, std::vector<std::vector<double>>(2, {0.5, 0.5}));
  spec.reward.assign(2, std::vector<double>(2));
  spec.reward[kStart] = {-10.0, -10.0};
  spec.reward[kBranch][kGood] = 12.0;
  spec.reward[kBranch][kBad] = 5.0;
  spec.initial_distribution = {1.0, 0.0};
  validate(spec);
  return spec;
}

FiniteMdpSpec token_view(const TreeBanditSpec& spec) {
  validate(spec);
  require(spec.terminal_prefixes.empty(), "token view: early termination is not supported");
  const int n = spec.actions_per_turn.front();
  require(std::ranges::all_of(spec.actions_per_turn, [n](int a) { return a == n; }),
          "token view: turns must share one action count");
  const auto keys = decision_histories(spec);
  std::map<HistoryKey, int> index;
  for (std::size_t i = 0; i < keys.size(); ++i) index.emplace(keys[i], static_cast<int>(i));

  FiniteMdpSpec mdp;
  mdp.num_states = static_cast<int>(keys.size());
  mdp.num_actions = n;
  mdp.horizon = spec.horizon;
  mdp.discount = 1.0;
  mdp.reward_timing = RewardTiming::kFinalStep;
  mdp.transition.assign(mdp.num_states, std::vector<std::vector<double>>(n));
  mdp.reward.assign(mdp.num_states, std::vector<double>(n, 0.0));
  mdp.initial_distribution.assign(mdp.num_states, 0.0);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto& key = keys[i];
    if (key.prefix.empty()) mdp.initial_distribution[i] = spec.initial_distribution[key.s0];
    for (int a = 0; a < n; ++a) {
      auto& row = mdp.transition[i][a];
      row.assign(mdp.num_states, 0.0);
      HistoryKey child{key.s0, key.prefix};
      child.prefix.push_back(a);
      if (key.turn() == spec.horizon) {
        row[i] = 1.0;
        mdp.reward[i][a] = spec.reward(key.s0, child.prefix);
      } else {
        row[index.at(child)] = 1.0;
      }
    }
  }
  validate(mdp);
  return mdp;
}

}  // namespace turnrl
