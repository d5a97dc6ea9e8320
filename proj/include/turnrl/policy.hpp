#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "turnrl/envs.hpp"

namespace turnrl {

// Softmax blocks over dense context ids, stored as one flat logit vector.
// Block c occupies [offset(c), offset(c) + num_actions(c)).
class SoftmaxTable {
 public:
  SoftmaxTable() = default;
  explicit SoftmaxTable(const std::vector<int>& action_counts);

  int num_contexts() const { return static_cast<int>(offsets_.size()); }
  int num_actions(int ctx) const { return counts_.at(ctx); }
  std::size_t offset(int ctx) const { return offsets_.at(ctx); }
  std::size_t size() const { return logits_.size(); }

  std::span<const double> logits(int ctx) const {
    return {logits_.data() + offset(ctx), static_cast<std::size_t>(num_actions(ctx))};
  }
  std::span<double> logits(int ctx) {
    return {logits_.data() + offset(ctx), static_cast<std::size_t>(num_actions(ctx))};
  }
  const std::vector<double>& flat() const { return logits_; }
  void set_flat(std::vector<double> logits);

  std::vector<double> probs(int ctx) const;
  double prob(int ctx, int action) const;
  double log_prob(int ctx, int action) const;
  // Probabilities for every block, laid out like flat().
  std::vector<double> all_probs() const;

  // grad[offset(ctx) + b] += scale * (1{b == action} - pi(b | ctx)), given the
  // block's probabilities.
  void add_score(int ctx, int action, double scale, std::span<const double> all_probs,
                 std::span<double> grad) const;

  void ascend(std::span<const double> direction, double step);

  friend bool operator==(const SoftmaxTable&, const SoftmaxTable&) = default;

 private:
  std::vector<int> counts_;
  std::vector<std::size_t> offsets_;
  std::vector<double> logits_;
};

// Softmax in place, shifted by the max for stability.
void softmax_inplace(std::span<double> values);

// Time-indexed context of a finite MDP.
struct StateTimeKey {
  int state = 0;
  int time = 0;
  friend auto operator<=>(const StateTimeKey&, const StateTimeKey&) = default;
};

struct PolicySnapshot {
  std::vector<double> logits;
  friend bool operator==(const PolicySnapshot&, const PolicySnapshot&) = default;
};

// A softmax table whose blocks are addressed by domain keys. Key order is
// fixed at construction and defines the gradient flattening.
template <typename Key>
class TabularSoftmaxPolicy {
 public:
  TabularSoftmaxPolicy() = default;
  TabularSoftmaxPolicy(std::vector<Key> keys, const std::vector<int>& action_counts)
      : keys_(std::move(keys)), table_(action_counts) {
    if (keys_.size() != action_counts.size())
      throw std::invalid_argument("policy: one action count per key");
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      if (!index_.emplace(keys_[i], static_cast<int>(i)).second)
        throw std::invalid_argument("policy: duplicate key");
    }
  }

  int context(const Key& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw std::out_of_range("policy: unknown key");
    return it->second;
  }
  bool contains(const Key& key) const { return index_.contains(key); }
  const Key& key(int ctx) const { return keys_.at(ctx); }
  const std::vector<Key>& keys() const { return keys_; }

  std::vector<double> action_probs(const Key& key) const { return table_.probs(context(key)); }
  double log_prob(const Key& key, int action) const {
    return table_.log_prob(context(key), action);
  }
  // d log pi(action | key) / d logits(key): one-hot minus probabilities.
  std::vector<double> grad_log_prob(const Key& key, int action) const {
    auto g = action_probs(key);
    if (action < 0 || action >= static_cast<int>(g.size()))
      throw std::out_of_range("policy: action out of range");
    for (double& x : g) x = -x;
    g[action] += 1.0;
    return g;
  }

  void set_logits(const Key& key, std::span<const double> values) {
    auto block = table_.logits(context(key));
    if (values.size() != block.size()) throw std::invalid_argument("policy: wrong logit count");
    std::copy(values.begin(), values.end(), block.begin());
  }

  PolicySnapshot snapshot() const { return {table_.flat()}; }
  void restore(const PolicySnapshot& snap) { table_.set_flat(snap.logits); }

  SoftmaxTable& table() { return table_; }
  const SoftmaxTable& table() const { return table_; }

 private:
  std::vector<Key> keys_;
  std::map<Key, int> index_;
  SoftmaxTable table_;
};

using TreePolicy = TabularSoftmaxPolicy<HistoryKey>;
using MdpPolicy = TabularSoftmaxPolicy<StateTimeKey>;

// Dense over every decision history, all logits zero (uniform policy).
TreePolicy make_tree_policy(const TreeBanditSpec& spec);
// Dense over (state, time) for t in [0, H); context id is t * S + s.
MdpPolicy make_mdp_policy(const FiniteMdpSpec& spec);

// Overwrites every logit with an independent N(0, sigma^2) draw.
void randomize_logits(SoftmaxTable& table, double sigma, std::uint64_t seed);

// pi_new(a^t | h) / pi_old(a^t | h) at one history.
double turn_ratio(const TreePolicy& candidate, const TreePolicy& old, const HistoryKey& key,
                  int action);
// Product of per-turn ratios over the real turns of a path (placeholders
// contribute 1), equal to the ratio of full path probabilities.
double sequence_ratio(const TreePolicy& candidate, const TreePolicy& old, int s0,
                      std::span<const int> actions, const TreeBanditSpec& spec);
// Probability of a path given s0, skipping placeholder turns.
double path_probability(const TreePolicy& policy, int s0, std::span<const int> actions,
                        const TreeBanditSpec& spec);

// Tree policy context -> token-view MDP context, for moving logits between
// a tree policy and the MDP policy over token_view(spec).
MdpPolicy to_token_policy(const TreePolicy& policy, const FiniteMdpSpec& view);
void from_token_policy(const MdpPolicy& token_policy, TreePolicy& policy);

}  // namespace turnrl
