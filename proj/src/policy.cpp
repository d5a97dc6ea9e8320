#include "turnrl/policy.hpp"

#include <algorithm>
#include <cmath>

#include "turnrl/random.hpp"

namespace turnrl {

SoftmaxTable::SoftmaxTable(const std::vector<int>& action_counts) : counts_(action_counts) {
  std::size_t total = 0;
  offsets_.reserve(counts_.size());
  for (int n : counts_) {
    if (n < 1) throw std::invalid_argument("softmax table: empty action set");
    offsets_.push_back(total);
    total += static_cast<std::size_t>(n);
  }
  logits_.assign(total, 0.0);
}

void SoftmaxTable::set_flat(std::vector<double> logits) {
  if (logits.size() != logits_.size()) throw std::invalid_argument("softmax table: size mismatch");
  logits_ = std::move(logits);
}

void softmax_inplace(std::span<double> values) {
  const double peak = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (double& v : values) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : values) v /= total;
}

std::vector<double> SoftmaxTable::probs(int ctx) const {
  auto block = logits(ctx);
  std::vector<double> p(block.begin(), block.end());
  softmax_inplace(p);
  return p;
}

double SoftmaxTable::prob(int ctx, int action) const {
  return std::exp(log_prob(ctx, action));
}

double SoftmaxTable::log_prob(int ctx, int action) const {
  auto block = logits(ctx);
  if (action < 0 || action >= static_cast<int>(block.size()))
    throw std::out_of_range("softmax table: action out of range");
  const double peak = *std::max_element(block.begin(), block.end());
  double total = 0.0;
  for (double v : block) total += std::exp(v - peak);
  return block[action] - peak - std::log(total);
}

std::vector<double> SoftmaxTable::all_probs() const {
  std::vector<double> p = logits_;
  for (int c = 0; c < num_contexts(); ++c) {
    softmax_inplace(std::span<double>(p.data() + offsets_[c], counts_[c]));
  }
  return p;
}

void SoftmaxTable::add_score(int ctx, int action, double scale, std::span<const double> all_probs,
                             std::span<double> grad) const {
  const std::size_t off = offsets_[ctx];
  const int n = counts_[ctx];
  for (int b = 0; b < n; ++b) grad[off + b] -= scale * all_probs[off + b];
  grad[off + action] += scale;
}

void SoftmaxTable::ascend(std::span<const double> direction, double step) {
  if (direction.size() != logits_.size()) throw std::invalid_argument("softmax table: size mismatch");
  for (std::size_t i = 0; i < logits_.size(); ++i) logits_[i] += step * direction[i];
}

TreePolicy make_tree_policy(const TreeBanditSpec& spec) {
  auto keys = decision_histories(spec);
  std::vector<int> counts;
  counts.reserve(keys.size());
  for (const auto& k : keys) counts.push_back(spec.actions_per_turn[k.turn() - 1]);
  return TreePolicy(std::move(keys), counts);
}

MdpPolicy make_mdp_policy(const FiniteMdpSpec& spec) {
  std::vector<StateTimeKey> keys;
  for (int t = 0; t < spec.horizon; ++t) {
    for (int s = 0; s < spec.num_states; ++s) keys.push_back({s, t});
  }
  std::vector<int> counts(keys.size(), spec.num_actions);
  return MdpPolicy(std::move(keys), counts);
}

void randomize_logits(SoftmaxTable& table, double sigma, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, "policy.init");
  std::vector<double> logits(table.size());
  for (double& x : logits) x = rng.normal(0.0, sigma);
  table.set_flat(std::move(logits));
}

double turn_ratio(const TreePolicy& candidate, const TreePolicy& old, const HistoryKey& key,
                  int action) {
  const int ctx = old.context(key);
  return std::exp(candidate.table().log_prob(ctx, action) - old.table().log_prob(ctx, action));
}

double sequence_ratio(const TreePolicy& candidate, const TreePolicy& old, int s0,
                      std::span<const int> actions, const TreeBanditSpec& spec) {
  const int len = spec.episode_length(s0, actions);
  double ratio = 1.0;
  HistoryKey key{s0, {}};
  for (int t = 0; t < len; ++t) {
    ratio *= turn_ratio(candidate, old, key, actions[t]);
    key.prefix.push_back(actions[t]);
  }
  return ratio;
}

double path_probability(const TreePolicy& policy, int s0, std::span<const int> actions,
                        const TreeBanditSpec& spec) {
  const int len = spec.episode_length(s0, actions);
  double p = 1.0;
  HistoryKey key{s0, {}};
  for (int t = 0; t < len; ++t) {
    p *= std::exp(policy.log_prob(key, actions[t]));
    key.prefix.push_back(actions[t]);
  }
  return p;
}

MdpPolicy to_token_policy(const TreePolicy& policy, const FiniteMdpSpec& view) {
  if (view.num_states != policy.table().num_contexts())
    throw std::invalid_argument("token policy: view does not match policy");
  MdpPolicy out = make_mdp_policy(view);
  for (int k = 0; k < policy.table().num_contexts(); ++k) {
    out.set_logits({k, policy.key(k).turn() - 1}, policy.table().logits(k));
  }
  return out;
}

void from_token_policy(const MdpPolicy& token_policy, TreePolicy& policy) {
  for (int k = 0; k < policy.table().num_contexts(); ++k) {
    const int ctx = token_policy.context({k, policy.key(k).turn() - 1});
    auto src = token_policy.table().logits(ctx);
    std::copy(src.begin(), src.end(), policy.table().logits(k).begin());
  }
}

}  // namespace turnrl
