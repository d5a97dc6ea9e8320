#include "turnrl/advantage.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace turnrl {
namespace {

void check_policy_shape(const FiniteMdpSpec& spec, const MdpPolicy& policy) {
  if (policy.table().num_contexts() != spec.num_states * spec.horizon)
    throw std::invalid_argument("mdp policy does not match the environment");
}

// Terminal values are exactly zero and never read from the grid.
double value_at(const ValueGrid& values, int t, int s) {
  if (t >= static_cast<int>(values.size()) || s >= static_cast<int>(values[t].size()))
    throw std::out_of_range("value table has no entry for (s=" + std::to_string(s) +
                            ", t=" + std::to_string(t) + ")");
  const double v = values[t][s];
  if (std::isnan(v)) throw std::domain_error("value table entry is undefined");
  return v;
}

double weighted_std(std::span<const double> x, std::span<const double> w) {
  double wsum = 0.0;
  double mean = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    wsum += w[i];
    mean += w[i] * x[i];
  }
  if (!(wsum > 0.0)) return 0.0;
  mean /= wsum;
  double var = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) var += w[i] * (x[i] - mean) * (x[i] - mean);
  return std::sqrt(var / wsum);
}

}  // namespace

MdpValueTable exact_values(const FiniteMdpSpec& spec, const MdpPolicy& policy) {
  return exact_values(spec, policy, spec.discount);
}

MdpValueTable exact_values(const FiniteMdpSpec& spec, const MdpPolicy& policy, double discount) {
  check_policy_shape(spec, policy);
  const int S = spec.num_states;
  const int A = spec.num_actions;
  const int H = spec.horizon;
  MdpValueTable table;
  table.discount = discount;
  table.v.assign(H + 1, std::vector<double>(S, 0.0));
  table.q.assign(H, std::vector<std::vector<double>>(S, std::vector<double>(A, 0.0)));
  const auto probs = policy.table().all_probs();
  for (int t = H - 1; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      const std::size_t off = policy.table().offset(t * S + s);
      double v = 0.0;
      for (int a = 0; a < A; ++a) {
        double next = 0.0;
        for (int s2 = 0; s2 < S; ++s2) next += spec.transition[s][a][s2] * table.v[t + 1][s2];
        const double q = spec.step_reward(s, a, t) + discount * next;
        table.q[t][s][a] = q;
        v += probs[off + a] * q;
      }
      table.v[t][s] = v;
    }
  }
  return table;
}

double exact_return(const FiniteMdpSpec& spec, const MdpPolicy& policy, double discount) {
  const auto table = exact_values(spec, policy, discount);
  double j = 0.0;
  for (int s = 0; s < spec.num_states; ++s) j += spec.initial_distribution[s] * table.v[0][s];
  return j;
}

TreeValueTable exact_values(const TreeBanditSpec& spec, const TreePolicy& policy) {
  const auto& keys = policy.keys();
  const int n = static_cast<int>(keys.size());
  TreeValueTable table;
  table.v.assign(n, 0.0);
  table.q.resize(n);
  table.initial.assign(spec.num_initial_states, 0.0);
  const auto probs = policy.table().all_probs();
  std::vector<int> padded(spec.horizon, kNoOp);
  // Children always come later in key order, so a reverse sweep sees them first.
  for (int c = n - 1; c >= 0; --c) {
    const auto& key = keys[c];
    const int t = key.turn();
    const int count = spec.actions_per_turn[t - 1];
    table.q[c].assign(count, 0.0);
    HistoryKey child{key.s0, key.prefix};
    child.prefix.push_back(0);
    double v = 0.0;
    for (int a = 0; a < count; ++a) {
      child.prefix.back() = a;
      double q;
      if (t == spec.horizon || spec.ends_after(key.s0, child.prefix)) {
        std::fill(padded.begin(), padded.end(), kNoOp);
        std::copy(child.prefix.begin(), child.prefix.end(), padded.begin());
        q = spec.reward(key.s0, padded);
      } else {
        q = table.v[policy.context(child)];
      }
      table.q[c][a] = q;
      v += probs[policy.table().offset(c) + a] * q;
    }
    table.v[c] = v;
    if (key.prefix.empty()) table.initial[key.s0] = v;
  }
  for (int s0 = 0; s0 < spec.num_initial_states; ++s0) {
    table.expected_return += spec.initial_distribution[s0] * table.initial[s0];
  }
  return table;
}

double exact_return(const TreeBanditSpec& spec, const TreePolicy& policy) {
  return exact_values(spec, policy).expected_return;
}

ValueGrid state_occupancy(const FiniteMdpSpec& spec, const MdpPolicy& policy,
                          std::optional<int> start) {
  check_policy_shape(spec, policy);
  const int S = spec.num_states;
  ValueGrid occ(spec.horizon, std::vector<double>(S, 0.0));
  if (start) {
    occ[0].at(*start) = 1.0;
  } else {
    occ[0] = spec.initial_distribution;
  }
  const auto probs = policy.table().all_probs();
  for (int t = 0; t + 1 < spec.horizon; ++t) {
    for (int s = 0; s < S; ++s) {
      if (occ[t][s] == 0.0) continue;
      const std::size_t off = policy.table().offset(t * S + s);
      for (int a = 0; a < spec.num_actions; ++a) {
        const double mass = occ[t][s] * probs[off + a];
        for (int s2 = 0; s2 < S; ++s2) occ[t + 1][s2] += mass * spec.transition[s][a][s2];
      }
    }
  }
  return occ;
}

std::vector<double> gae_estimate(const MdpTrajectory& trajectory, const ValueGrid& values,
                                 double gamma, double lambda) {
  if (gamma < 0.0 || gamma > 1.0 || lambda < 0.0 || lambda > 1.0)
    throw std::invalid_argument("gae_estimate: gamma and lambda must lie in [0, 1]");
  const auto& steps = trajectory.steps;
  const int H = static_cast<int>(steps.size());
  std::vector<double> adv(H, 0.0);
  double running = 0.0;
  for (int t = H - 1; t >= 0; --t) {
    const double next = t + 1 < H ? value_at(values, t + 1, steps[t + 1].state) : 0.0;
    const double delta = steps[t].reward + gamma * next - value_at(values, t, steps[t].state);
    running = delta + gamma * lambda * running;
    adv[t] = running;
  }
  return adv;
}

StateActionTable expected_gae(const FiniteMdpSpec& spec, const MdpPolicy& policy,
                              const ValueGrid& values, double gamma, double lambda) {
  check_policy_shape(spec, policy);
  const int S = spec.num_states;
  const int A = spec.num_actions;
  const int H = spec.horizon;
  const auto probs = policy.table().all_probs();
  StateActionTable out(H, std::vector<std::vector<double>>(S, std::vector<double>(A, 0.0)));
  for (int t = H - 1; t >= 0; --t) {
    // Expected advantage at each next state under the policy, for t + 1.
    std::vector<double> next_adv(S, 0.0);
    std::vector<double> next_value(S, 0.0);
    for (int s2 = 0; s2 < S; ++s2) {
      if (t + 1 < H) {
        next_value[s2] = value_at(values, t + 1, s2);
        const std::size_t off = policy.table().offset((t + 1) * S + s2);
        for (int a2 = 0; a2 < A; ++a2) next_adv[s2] += probs[off + a2] * out[t + 1][s2][a2];
      }
    }
    for (int s = 0; s < S; ++s) {
      const double here = value_at(values, t, s);
      for (int a = 0; a < A; ++a) {
        double v_next = 0.0;
        double a_next = 0.0;
        for (int s2 = 0; s2 < S; ++s2) {
          const double p = spec.transition[s][a][s2];
          v_next += p * next_value[s2];
          a_next += p * next_adv[s2];
        }
        const double delta = spec.step_reward(s, a, t) + gamma * v_next - here;
        out[t][s][a] = delta + gamma * lambda * a_next;
      }
    }
  }
  return out;
}

double gae_bias_bound(double gamma, double lambda, double eps_max) {
  if (gamma * lambda >= 1.0) throw std::domain_error("gae_bias_bound: requires gamma * lambda < 1");
  return (1.0 + gamma - 2.0 * gamma * lambda) / (1.0 - gamma * lambda) * eps_max;
}

TokenGraeExpectation expected_grae(const FiniteMdpSpec& spec, const MdpPolicy& policy,
                                   std::optional<int> start) {
  check_policy_shape(spec, policy);
  const int S = spec.num_states;
  const int A = spec.num_actions;
  const int H = spec.horizon;
  const auto values = exact_values(spec, policy, 1.0);
  const auto probs = policy.table().all_probs();

  std::vector<int> starts;
  if (start) {
    starts.push_back(*start);
  } else {
    for (int s = 0; s < S; ++s) {
      if (spec.initial_distribution[s] > 0.0) starts.push_back(s);
    }
  }

  TokenGraeExpectation out;
  out.occupancy.assign(H, std::vector<double>(S, 0.0));
  // Unnormalized E[(past reward - V(s0)) 1{s_t = s}], summed over starts.
  ValueGrid shift(H, std::vector<double>(S, 0.0));
  for (int s0 : starts) {
    const double d = start ? 1.0 : spec.initial_distribution[s0];
    ValueGrid reach(H, std::vector<double>(S, 0.0));
    ValueGrid past(H, std::vector<double>(S, 0.0));
    reach[0][s0] = 1.0;
    for (int t = 0; t + 1 < H; ++t) {
      for (int s = 0; s < S; ++s) {
        if (reach[t][s] == 0.0) continue;
        const std::size_t off = policy.table().offset(t * S + s);
        for (int a = 0; a < A; ++a) {
          const double mass = reach[t][s] * probs[off + a];
          const double carried = past[t][s] * probs[off + a] + mass * spec.step_reward(s, a, t);
          for (int s2 = 0; s2 < S; ++s2) {
            const double p = spec.transition[s][a][s2];
            reach[t + 1][s2] += mass * p;
            past[t + 1][s2] += carried * p;
          }
        }
      }
    }
    const double v0 = values.v[0][s0];
    for (int t = 0; t < H; ++t) {
      for (int s = 0; s < S; ++s) {
        out.occupancy[t][s] += d * reach[t][s];
        shift[t][s] += d * (past[t][s] - reach[t][s] * v0);
      }
    }
  }
  out.advantage.assign(H, std::vector<std::vector<double>>(S, std::vector<double>(A, 0.0)));
  for (int t = 0; t < H; ++t) {
    for (int s = 0; s < S; ++s) {
      if (out.occupancy[t][s] <= 0.0) continue;
      const double mean_shift = shift[t][s] / out.occupancy[t][s];
      for (int a = 0; a < A; ++a) out.advantage[t][s][a] = values.q[t][s][a] + mean_shift;
    }
  }
  return out;
}

std::vector<double> grae_from_rewards(std::span<const double> rewards,
                                      std::span<const double> weights, bool leave_one_out) {
  if (rewards.size() != weights.size()) throw std::invalid_argument("grae: misaligned weights");
  const std::size_t n = rewards.size();
  if (leave_one_out && n < 2) throw std::invalid_argument("grae: leave-one-out needs G >= 2");
  double wsum = 0.0;
  double rsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    wsum += weights[i];
    rsum += weights[i] * rewards[i];
  }
  std::vector<double> adv(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (leave_one_out) {
      const double others = wsum - weights[i];
      const double baseline = others > 0.0 ? (rsum - weights[i] * rewards[i]) / others : rewards[i];
      adv[i] = rewards[i] - baseline;
    } else {
      adv[i] = rewards[i] - (wsum > 0.0 ? rsum / wsum : 0.0);
    }
  }
  return adv;
}

std::vector<double> grae_estimate(const Group& group, bool leave_one_out) {
  std::vector<double> rewards;
  std::vector<double> weights;
  for (const auto& tr : group.trajectories) {
    rewards.push_back(tr.reward);
    weights.push_back(tr.weight);
  }
  if (!leave_one_out) {
    // The group mean is the baseline; in exact mode it is V(s0).
    std::vector<double> adv;
    for (double r : rewards) adv.push_back(r - group.mean_reward);
    return adv;
  }
  return grae_from_rewards(rewards, weights, true);
}

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::kGae: return "GAE";
    case Estimator::kGrae: return "GRAE";
    case Estimator::kGraeLoo: return "GRAE-LOO";
  }
  return "?";
}

std::string_view to_string(Normalization n) {
  switch (n) {
    case Normalization::kNone: return "none";
    case Normalization::kBatch: return "batch";
    case Normalization::kGroup: return "group";
  }
  return "?";
}

Estimator parse_estimator(std::string_view name) {
  if (name == "GAE" || name == "gae") return Estimator::kGae;
  if (name == "GRAE" || name == "grae") return Estimator::kGrae;
  if (name == "GRAE-LOO" || name == "grae-loo") return Estimator::kGraeLoo;
  throw std::invalid_argument("unknown estimator: " + std::string(name));
}

Normalization parse_normalization(std::string_view name) {
  if (name == "none") return Normalization::kNone;
  if (name == "batch") return Normalization::kBatch;
  if (name == "group") return Normalization::kGroup;
  throw std::invalid_argument("unknown normalization: " + std::string(name));
}

std::vector<AdvantageRecord> normalize_batch(std::vector<AdvantageRecord> records) {
  double wsum = 0.0;
  double mean = 0.0;
  for (const auto& r : records) {
    wsum += r.weight;
    mean += r.weight * r.raw;
  }
  mean = wsum > 0.0 ? mean / wsum : 0.0;
  double var = 0.0;
  for (const auto& r : records) var += r.weight * (r.raw - mean) * (r.raw - mean);
  const double sd = wsum > 0.0 ? std::sqrt(var / wsum) : 0.0;
  const bool degenerate = records.size() < 2 || sd <= kDegenerateStd;
  for (auto& r : records) {
    r.normalization = Normalization::kBatch;
    r.batch_mean = mean;
    r.batch_std = sd;
    r.degenerate = degenerate;
    r.normalized = degenerate ? r.raw : (r.raw - mean) / sd;
  }
  return records;
}

std::vector<AdvantageRecord> normalize_group(std::vector<AdvantageRecord> records) {
  for (auto& r : records) {
    r.normalization = Normalization::kGroup;
    r.degenerate = r.group_std <= kDegenerateStd;
    r.normalized = r.degenerate ? r.raw : r.raw / r.group_std;
  }
  return records;
}

std::vector<AdvantageRecord> grae_records(const std::vector<Group>& groups, bool leave_one_out) {
  std::vector<AdvantageRecord> records;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const auto adv = grae_estimate(g, leave_one_out);
    std::vector<double> rewards;
    std::vector<double> weights;
    for (const auto& tr : g.trajectories) {
      rewards.push_back(tr.reward);
      weights.push_back(tr.weight);
    }
    const double sd = weighted_std(rewards, weights);
    for (std::size_t ti = 0; ti < g.trajectories.size(); ++ti) {
      AdvantageRecord rec;
      rec.group = static_cast<int>(gi);
      rec.trajectory = static_cast<int>(ti);
      rec.estimator = leave_one_out ? Estimator::kGraeLoo : Estimator::kGrae;
      rec.weight = g.weight * g.trajectories[ti].weight;
      rec.raw = adv[ti];
      rec.normalized = adv[ti];
      rec.group_std = sd;
      records.push_back(rec);
    }
  }
  return records;
}

std::vector<AdvantageRecord> apply_normalization(std::vector<AdvantageRecord> records,
                                                 Normalization mode) {
  switch (mode) {
    case Normalization::kNone: return records;
    case Normalization::kBatch: return normalize_batch(std::move(records));
    case Normalization::kGroup: return normalize_group(std::move(records));
  }
  return records;
}

}  // namespace turnrl
