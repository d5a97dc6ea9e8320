#include "turnrl/rollout.hpp"

#include <cmath>
#include <stdexcept>

#include "turnrl/random.hpp"

namespace turnrl {
namespace {

Trajectory sample_trajectory(const TreeBanditSpec& spec, const TreePolicy& policy, int s0,
                             Rng& rng) {
  Trajectory traj;
  traj.s0 = s0;
  traj.actions.assign(spec.horizon, kNoOp);
  traj.behavior_log_probs.assign(spec.horizon, 0.0);
  HistoryKey key{s0, {}};
  for (int t = 0; t < spec.horizon; ++t) {
    if (t > 0 && spec.ends_after(s0, key.prefix)) break;
    const int ctx = policy.context(key);
    const auto probs = policy.table().probs(ctx);
    const int a = rng.categorical(probs);
    traj.actions[t] = a;
    traj.behavior_log_probs[t] = policy.table().log_prob(ctx, a);
    key.prefix.push_back(a);
  }
  traj.reward = spec.reward(s0, traj.actions);
  return traj;
}

}  // namespace

double weighted_mean_reward(const std::vector<Trajectory>& trajectories) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& tr : trajectories) {
    num += tr.weight * tr.reward;
    den += tr.weight;
  }
  return den > 0.0 ? num / den : 0.0;
}

std::vector<Group> collect_batch(const TreeBanditSpec& spec, const TreePolicy& policy,
                                 int batch_size, int group_size, std::uint64_t seed) {
  if (batch_size < 1 || group_size < 1) throw std::invalid_argument("collect_batch: B, G >= 1");
  Rng start_rng = Rng::derive(seed, "rollout.initial_states");
  std::vector<Group> groups(batch_size);
  for (auto& g : groups) g.s0 = start_rng.categorical(spec.initial_distribution);
  for (int b = 0; b < batch_size; ++b) {
    Group& g = groups[b];
    Rng rng = Rng::derive(seed, "rollout.group", static_cast<std::uint64_t>(b));
    g.weight = 1.0 / batch_size;
    for (int i = 0; i < group_size; ++i) {
      g.trajectories.push_back(sample_trajectory(spec, policy, g.s0, rng));
      g.trajectories.back().weight = 1.0 / group_size;
    }
    g.mean_reward = weighted_mean_reward(g.trajectories);
  }
  return groups;
}

std::vector<Group> enumerate_batch(const TreeBanditSpec& spec, const TreePolicy& policy,
                                   std::size_t cap) {
  std::vector<Group> groups;
  std::size_t total = 0;
  for (int s0 = 0; s0 < spec.num_initial_states; ++s0) {
    auto episodes = enumerate_episodes(spec, s0);
    total += episodes.size();
    if (total > cap) throw std::length_error("enumerate_batch: exact path cap exceeded");
    Group g;
    g.s0 = s0;
    g.weight = spec.initial_distribution[s0];
    for (auto& ep : episodes) {
      Trajectory traj;
      traj.s0 = s0;
      traj.behavior_log_probs.assign(spec.horizon, 0.0);
      double logp = 0.0;
      HistoryKey key{s0, {}};
      for (int t = 0; t < spec.horizon && ep.actions[t] != kNoOp; ++t) {
        traj.behavior_log_probs[t] = policy.log_prob(key, ep.actions[t]);
        logp += traj.behavior_log_probs[t];
        key.prefix.push_back(ep.actions[t]);
      }
      traj.actions = std::move(ep.actions);
      traj.reward = ep.reward;
      traj.weight = std::exp(logp);
      g.trajectories.push_back(std::move(traj));
    }
    g.mean_reward = weighted_mean_reward(g.trajectories);
    groups.push_back(std::move(g));
  }
  return groups;
}

std::vector<TurnPool> build_turn_pools(const std::vector<Group>& groups, int horizon) {
  std::vector<TurnPool> pools(horizon);
  for (int t = 0; t < horizon; ++t) pools[t].turn = t + 1;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& trajs = groups[gi].trajectories;
    for (std::size_t ti = 0; ti < trajs.size(); ++ti) {
      const auto& tr = trajs[ti];
      if (static_cast<int>(tr.actions.size()) != horizon)
        throw std::invalid_argument("build_turn_pools: trajectory length differs from horizon");
      HistoryKey key{tr.s0, {}};
      bool ended = false;
      for (int t = 0; t < horizon; ++t) {
        TurnSample sample;
        sample.group = static_cast<int>(gi);
        sample.trajectory = static_cast<int>(ti);
        sample.action = tr.actions[t];
        ended = ended || tr.actions[t] == kNoOp;
        sample.is_placeholder = ended;
        sample.key = key;
        pools[t].samples.push_back(std::move(sample));
        key.prefix.push_back(tr.actions[t]);
      }
    }
  }
  return pools;
}

namespace {

MdpTrajectory sample_mdp_trajectory(const FiniteMdpSpec& spec, const MdpPolicy& policy, int s0,
                                    Rng& rng) {
  MdpTrajectory traj;
  traj.s0 = s0;
  int s = s0;
  for (int t = 0; t < spec.horizon; ++t) {
    const int ctx = policy.context({s, t});
    const int a = rng.categorical(policy.table().probs(ctx));
    const double r = spec.step_reward(s, a, t);
    traj.steps.push_back({s, a, r, policy.table().log_prob(ctx, a)});
    traj.total_reward += r;
    s = rng.categorical(spec.transition[s][a]);
  }
  return traj;
}

}  // namespace

std::vector<MdpGroup> collect_mdp_batch(const FiniteMdpSpec& spec, const MdpPolicy& policy,
                                        int batch_size, int group_size, std::uint64_t seed) {
  if (batch_size < 1 || group_size < 1) throw std::invalid_argument("collect_mdp_batch: B, G >= 1");
  Rng start_rng = Rng::derive(seed, "rollout.initial_states");
  std::vector<MdpGroup> groups(batch_size);
  for (auto& g : groups) g.s0 = start_rng.categorical(spec.initial_distribution);
  for (int b = 0; b < batch_size; ++b) {
    MdpGroup& g = groups[b];
    Rng rng = Rng::derive(seed, "rollout.group", static_cast<std::uint64_t>(b));
    g.weight = 1.0 / batch_size;
    double sum = 0.0;
    for (int i = 0; i < group_size; ++i) {
      g.trajectories.push_back(sample_mdp_trajectory(spec, policy, g.s0, rng));
      g.trajectories.back().weight = 1.0 / group_size;
      sum += g.trajectories.back().total_reward;
    }
    g.mean_reward = sum / group_size;
  }
  return groups;
}

std::vector<MdpGroup> enumerate_mdp_batch(const FiniteMdpSpec& spec, const MdpPolicy& policy,
                                          std::size_t cap) {
  if (mdp_trajectory_count(spec) > cap)
    throw std::length_error("enumerate_mdp_batch: exact path cap exceeded");
  const auto probs = policy.table().all_probs();
  std::vector<MdpGroup> groups;
  for (int s0 = 0; s0 < spec.num_states; ++s0) {
    if (spec.initial_distribution[s0] <= 0.0) continue;
    MdpGroup g;
    g.s0 = s0;
    g.weight = spec.initial_distribution[s0];
    MdpTrajectory current;
    current.s0 = s0;
    auto recurse = [&](auto&& self, int s, int t, double p) -> void {
      if (t == spec.horizon) {
        current.weight = p;
        current.total_reward = 0.0;
        for (const auto& step : current.steps) current.total_reward += step.reward;
        g.trajectories.push_back(current);
        return;
      }
      const int ctx = policy.context({s, t});
      const std::size_t off = policy.table().offset(ctx);
      for (int a = 0; a < spec.num_actions; ++a) {
        const double pa = probs[off + a];
        const double r = spec.step_reward(s, a, t);
        current.steps.push_back({s, a, r, std::log(pa)});
        if (t + 1 == spec.horizon) {
          self(self, s, t + 1, p * pa);
        } else {
          for (int s2 = 0; s2 < spec.num_states; ++s2) {
            const double ps = spec.transition[s][a][s2];
            if (ps > 0.0) self(self, s2, t + 1, p * pa * ps);
          }
        }
        current.steps.pop_back();
      }
    };
    recurse(recurse, s0, 0, 1.0);
    double num = 0.0;
    for (const auto& tr : g.trajectories) num += tr.weight * tr.total_reward;
    g.mean_reward = num;
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace turnrl
