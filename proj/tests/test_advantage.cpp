#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "turnrl/advantage.hpp"
#include "turnrl/random.hpp"
#include "turnrl/suites.hpp"
#include "turnrl/theory.hpp"

using namespace turnrl;

namespace {

FiniteMdpSpec small_mdp(std::uint64_t seed, int states, int horizon,
                        RewardTiming timing = RewardTiming::kEveryStep) {
  FiniteMdpShape shape;
  shape.min_states = shape.max_states = states;
  shape.min_actions = 2;
  shape.max_actions = 3;
  shape.min_horizon = shape.max_horizon = horizon;
  shape.reward_min = -1.0;
  shape.reward_timing = timing;
  return generate_finite_mdp(seed, shape);
}

MdpPolicy random_policy(const FiniteMdpSpec& spec, std::uint64_t seed) {
  auto p = make_mdp_policy(spec);
  randomize_logits(p.table(), 1.0, seed);
  return p;
}

// Q and V from explicit trajectory enumeration.
struct OracleValues {
  std::map<std::tuple<int, int, int>, double> q;
  std::map<std::pair<int, int>, double> v;
};

OracleValues oracle_values(const FiniteMdpSpec& spec, const MdpPolicy& policy, double gamma) {
  const auto trajs = oracle::mdp_trajectories(spec, policy);
  OracleValues out;
  out.q = oracle::conditional_mean(
      trajs, [&](const oracle::Traj& tr, int t) { return oracle::discounted(tr.rewards, gamma, t); });
  for (const auto& [k, q] : out.q) {
    const auto [t, s, a] = k;
    out.v[{t, s}] += oracle::mdp_probs(policy, spec, s, t)[a] * q;
  }
  return out;
}

double oracle_gae(const oracle::Traj& tr, int t, const ValueGrid& v, double gamma, double lambda) {
  const int H = static_cast<int>(tr.actions.size());
  double sum = 0.0, w = 1.0;
  for (int k = t; k < H; ++k, w *= gamma * lambda) {
    const double next = k + 1 < H ? v[k + 1][tr.states[k + 1]] : 0.0;
    sum += w * (tr.rewards[k] + gamma * next - v[k][tr.states[k]]);
  }
  return sum;
}

std::vector<AdvantageRecord> records_from(std::vector<double> raw, std::vector<double> group_std = {}) {
  std::vector<AdvantageRecord> out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    AdvantageRecord r;
    r.trajectory = static_cast<int>(i);
    r.raw = r.normalized = raw[i];
    if (!group_std.empty()) r.group_std = group_std[i];
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST(ExactValues, ZeroRewardsGiveZeroValues) {
  auto spec = small_mdp(1, 3, 3);
  for (auto& row : spec.reward) std::fill(row.begin(), row.end(), 0.0);
  const auto values = exact_values(spec, random_policy(spec, 1), 0.9);
  for (const auto& row : values.v)
    for (double v : row) EXPECT_EQ(v, 0.0);
}

TEST(ExactValues, DegradationMdpValues) {
  using namespace degradation;
  const auto spec = build_degradation_mdp();
  const auto values = exact_values(spec, degradation_reference_policy(spec), 1.0);
  EXPECT_NEAR(values.v[0][kStart], 0.0, 1e-12);
  EXPECT_NEAR(values.v[1][kBranch], 10.0, 1e-12);
}

TEST(ExactValues, MatchTrajectoryEnumeration) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto spec = small_mdp(seed, 2, 3);
    const auto policy = random_policy(spec, seed);
    for (double gamma : {1.0, 0.9}) {
      const auto values = exact_values(spec, policy, gamma);
      const auto ref = oracle_values(spec, policy, gamma);
      for (const auto& [k, q] : ref.q) {
        const auto [t, s, a] = k;
        EXPECT_NEAR(values.q[t][s][a], q, 1e-10);
      }
      for (const auto& [k, v] : ref.v) EXPECT_NEAR(values.v[k.first][k.second], v, 1e-10);
      EXPECT_NEAR(exact_return(spec, policy, gamma), oracle::mdp_return(spec, policy, gamma), 1e-10);
    }
  }
}

TEST(ExactValues, ValueIsPolicyAverageOfQ) {
  const auto spec = small_mdp(4, 4, 4);
  const auto policy = random_policy(spec, 4);
  const auto values = exact_values(spec, policy, 0.95);
  for (int t = 0; t < spec.horizon; ++t)
    for (int s = 0; s < spec.num_states; ++s) {
      const auto pi = oracle::mdp_probs(policy, spec, s, t);
      double v = 0.0;
      for (int a = 0; a < spec.num_actions; ++a) v += pi[a] * values.q[t][s][a];
      EXPECT_NEAR(values.v[t][s], v, 1e-10);
    }
}

TEST(ExactValues, TreeReturnMatchesPathEnumeration) {
  TreeBanditShape shape;
  shape.max_states = 3;
  shape.max_turns = 3;
  shape.max_actions = 3;
  shape.termination_probability = 0.3;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto spec = generate_tree_bandit(seed, shape);
    auto policy = make_tree_policy(spec);
    randomize_logits(policy.table(), 1.0, seed);
    EXPECT_NEAR(exact_return(spec, policy), oracle::tree_return(spec, policy), 1e-12);
  }
}

TEST(Gae, LambdaZeroIsOneStepTdError) {
  const auto spec = small_mdp(2, 3, 3);
  const auto policy = random_policy(spec, 2);
  const auto groups = collect_mdp_batch(spec, policy, 4, 2, 5);
  ValueGrid v = exact_values(spec, policy, 0.9).v;
  v[1][0] += 0.3;  // any critic works
  for (const auto& g : groups)
    for (const auto& tr : g.trajectories) {
      const auto adv = gae_estimate(tr, v, 0.9, 0.0);
      for (std::size_t t = 0; t < tr.steps.size(); ++t) {
        const double next = t + 1 < tr.steps.size() ? v[t + 1][tr.steps[t + 1].state] : 0.0;
        EXPECT_NEAR(adv[t], tr.steps[t].reward + 0.9 * next - v[t][tr.steps[t].state], 1e-15);
      }
    }
}

TEST(Gae, LambdaOneZeroCriticIsRemainingReward) {
  const auto spec = small_mdp(3, 3, 4);
  const auto policy = random_policy(spec, 3);
  const ValueGrid zero(spec.horizon + 1, std::vector<double>(spec.num_states, 0.0));
  for (const auto& g : collect_mdp_batch(spec, policy, 3, 3, 7))
    for (const auto& tr : g.trajectories) {
      const auto adv = gae_estimate(tr, zero, 1.0, 1.0);
      for (std::size_t t = 0; t < tr.steps.size(); ++t) {
        double remaining = 0.0;
        for (std::size_t k = t; k < tr.steps.size(); ++k) remaining += tr.steps[k].reward;
        EXPECT_NEAR(adv[t], remaining, 1e-12);
      }
    }
}

TEST(Gae, MissingValueThrows) {
  const auto spec = small_mdp(3, 3, 3);
  const auto policy = random_policy(spec, 3);
  const auto tr = collect_mdp_batch(spec, policy, 1, 1, 1)[0].trajectories[0];
  ValueGrid v = exact_values(spec, policy).v;
  v[0][tr.steps[0].state] = std::nan("");
  EXPECT_THROW(gae_estimate(tr, v, 0.9, 0.5), std::domain_error);
  v.resize(1);
  EXPECT_THROW(gae_estimate(tr, v, 0.9, 0.5), std::out_of_range);
}

TEST(Gae, ExactExpectationWithTrueValuesIsTrueAdvantage) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto spec = small_mdp(seed, 3, 3);
    const auto policy = random_policy(spec, seed);
    const double gamma = 0.9, lambda = 0.7;
    const auto ref = oracle_values(spec, policy, gamma);
    const auto values = exact_values(spec, policy, gamma);
    const auto gae = expected_gae(spec, policy, values.v, gamma, lambda);
    for (const auto& [k, q] : ref.q) {
      const auto [t, s, a] = k;
      EXPECT_NEAR(gae[t][s][a], q - ref.v.at({t, s}), 1e-10);
    }
  }
}

TEST(Gae, ExpectedGaeMatchesTrajectoryAverageForAnyCritic) {
  const auto spec = small_mdp(6, 3, 3);
  const auto policy = random_policy(spec, 6);
  ValueGrid v(spec.horizon + 1, std::vector<double>(spec.num_states, 0.0));
  Rng rng(6);
  for (int t = 0; t < spec.horizon; ++t)
    for (double& x : v[t]) x = rng.uniform(-1, 1);
  const auto trajs = oracle::mdp_trajectories(spec, policy);
  const auto ref = oracle::conditional_mean(
      trajs, [&](const oracle::Traj& tr, int t) { return oracle_gae(tr, t, v, 0.8, 0.6); });
  const auto gae = expected_gae(spec, policy, v, 0.8, 0.6);
  for (const auto& [k, x] : ref) {
    const auto [t, s, a] = k;
    EXPECT_NEAR(gae[t][s][a], x, 1e-12);
  }
}

TEST(GaeBiasBound, ClosedForm) {
  EXPECT_NEAR(gae_bias_bound(0.9, 0.0, 0.1), 0.19, 1e-15);
  EXPECT_NEAR(gae_bias_bound(0.9, 0.5, 0.1), (1.9 - 0.9) / (1 - 0.45) * 0.1, 1e-15);
  EXPECT_NEAR(gae_bias_bound(0.9, 0.5, 0.1), 0.181818, 1e-6);
  EXPECT_NEAR(gae_bias_bound(0.9, 1.0 - 1e-12, 0.1), 0.1, 1e-9);
}

TEST(GaeBiasBound, RejectsGammaLambdaOne) {
  EXPECT_THROW(gae_bias_bound(1.0, 1.0, 0.1), std::domain_error);
}

TEST(GaeBiasBound, HoldsUnderPerturbedCritics) {
  Rng rng(12);
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto spec = small_mdp(seed, 3, 4);
    const auto policy = random_policy(spec, seed);
    for (double gamma : {0.5, 0.99})
      for (double lambda : {0.0, 0.95}) {
        const auto values = exact_values(spec, policy, gamma);
        for (int trial = 0; trial < 5; ++trial) {
          auto v = values.v;
          for (int t = 0; t < spec.horizon; ++t)
            for (double& x : v[t]) x += 0.1 * (rng.uniform() < 0.5 ? -1.0 : 1.0);
          const auto gae = expected_gae(spec, policy, v, gamma, lambda);
          const double bound = gae_bias_bound(gamma, lambda, 0.1);
          for (int t = 0; t < spec.horizon; ++t)
            for (int s = 0; s < spec.num_states; ++s)
              for (int a = 0; a < spec.num_actions; ++a)
                EXPECT_LE(std::abs(gae[t][s][a] - values.advantage(s, a, t)), bound + 1e-10);
        }
      }
  }
}

TEST(Grae, MeanSubtraction) {
  const std::vector<double> r = {1, 0, 0, 1}, w = {1, 1, 1, 1};
  EXPECT_EQ(grae_from_rewards(r, w, false), (std::vector<double>{0.5, -0.5, -0.5, 0.5}));
}

TEST(Grae, EqualRewardsGiveZero) {
  const std::vector<double> r = {0.25, 0.25, 0.25}, w = {1, 1, 1};
  for (double a : grae_from_rewards(r, w, false)) EXPECT_EQ(a, 0.0);
  for (double a : grae_from_rewards(r, w, true)) EXPECT_EQ(a, 0.0);
}

TEST(Grae, LeaveOneOutUsesOtherMembers) {
  const std::vector<double> r = {1, 0, 0, 1}, w = {1, 1, 1, 1};
  const auto adv = grae_from_rewards(r, w, true);
  EXPECT_NEAR(adv[0], 1.0 - 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(adv[1], 0.0 - 2.0 / 3.0, 1e-15);
  const std::vector<double> one = {1.0}, w1 = {1.0};
  EXPECT_THROW(grae_from_rewards(one, w1, true), std::invalid_argument);
}

TEST(Grae, ExactModeIsRewardMinusInitialValue) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TreeBanditShape shape;
    shape.max_states = 3;
    shape.max_turns = 3;
    shape.max_actions = 3;
    const auto spec = generate_tree_bandit(seed, shape);
    auto policy = make_tree_policy(spec);
    randomize_logits(policy.table(), 1.0, seed);
    for (const auto& g : enumerate_batch(spec, policy)) {
      double v0 = 0.0;
      for (const auto& e : enumerate_episodes(spec, g.s0))
        v0 += oracle::tree_path_prob(policy, g.s0, e.actions) * e.reward;
      const auto adv = grae_estimate(g, false);
      for (std::size_t i = 0; i < adv.size(); ++i)
        EXPECT_NEAR(adv[i], g.trajectories[i].reward - v0, 1e-12);
    }
  }
}

TEST(Grae, TokenBiasIsValueDifferenceWithTerminalRewards) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto spec = small_mdp(seed, 3, 3, RewardTiming::kFinalStep);
    const auto policy = random_policy(spec, seed);
    const auto values = exact_values(spec, policy, 1.0);
    const auto trajs = oracle::mdp_trajectories(spec, policy);
    for (int s0 = 0; s0 < spec.num_states; ++s0) {
      if (spec.initial_distribution[s0] == 0.0) continue;
      std::vector<oracle::Traj> from;
      for (const auto& tr : trajs)
        if (tr.states[0] == s0) from.push_back(tr);
      const auto ref = oracle::conditional_mean(from, [&](const oracle::Traj& tr, int) {
        return oracle::discounted(tr.rewards, 1.0) - values.v[0][s0];
      });
      const auto g = expected_grae(spec, policy, s0);
      for (const auto& [k, x] : ref) {
        const auto [t, s, a] = k;
        EXPECT_NEAR(g.advantage[t][s][a], x, 1e-10);
        EXPECT_NEAR(x - values.advantage(s, a, t), values.v[t][s] - values.v[0][s0], 1e-10);
      }
    }
  }
}

TEST(Grae, DegradationBiasIsTen) {
  using namespace degradation;
  const auto spec = build_degradation_mdp();
  const auto policy = degradation_reference_policy(spec);
  const auto values = exact_values(spec, policy, 1.0);
  const auto g = expected_grae(spec, policy, kStart);
  EXPECT_NEAR(g.advantage[1][kBranch][kGood], 12.0, 1e-12);
  EXPECT_NEAR(g.advantage[1][kBranch][kBad], 5.0, 1e-12);
  EXPECT_NEAR(g.advantage[1][kBranch][kBad] - values.advantage(kBranch, kBad, 1), 10.0, 1e-12);
}

TEST(NormalizeBatch, AlreadyStandardized) {
  const auto out = normalize_batch(records_from({1, -1}));
  EXPECT_EQ(out[0].normalized, 1.0);
  EXPECT_EQ(out[1].normalized, -1.0);
  EXPECT_FALSE(out[0].degenerate);
}

TEST(NormalizeBatch, OutputHasZeroMeanUnitStd) {
  const auto out = normalize_batch(records_from({2, 4, 6}));
  double mean = 0.0, sq = 0.0;
  for (const auto& r : out) mean += r.normalized / 3.0;
  for (const auto& r : out) sq += (r.normalized - mean) * (r.normalized - mean) / 3.0;
  EXPECT_NEAR(mean, 0.0, 1e-15);
  EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-15);
  EXPECT_NEAR(out[0].normalized, -2.0 / std::sqrt(8.0 / 3.0), 1e-15);
  EXPECT_EQ(out[0].batch_mean, 4.0);
  EXPECT_NEAR(out[0].batch_std, std::sqrt(8.0 / 3.0), 1e-15);
}

TEST(NormalizeBatch, DegenerateBatchPassesThrough) {
  const auto out = normalize_batch(records_from({0.7, 0.7, 0.7}));
  for (const auto& r : out) {
    EXPECT_TRUE(r.degenerate);
    EXPECT_EQ(r.normalized, 0.7);
  }
  EXPECT_TRUE(normalize_batch(records_from({3.0}))[0].degenerate);
}

TEST(NormalizeGroup, DividesByGroupStd) {
  const std::vector<double> w = {1, 1};
  const std::vector<double> r1 = {0, 2}, r2 = {0, 4};
  const auto a1 = grae_from_rewards(r1, w, false);
  const auto a2 = grae_from_rewards(r2, w, false);
  auto recs = records_from({a1[0], a1[1], a2[0], a2[1]}, {1.0, 1.0, 2.0, 2.0});
  const auto out = normalize_group(recs);
  EXPECT_EQ(out[0].normalized, a1[0]);
  EXPECT_EQ(out[1].normalized, a1[1]);
  EXPECT_EQ(out[2].normalized, a2[0] / 2.0);
  EXPECT_EQ(out[3].normalized, a2[1] / 2.0);
  EXPECT_EQ(out[2].normalized, out[0].normalized);
}

TEST(NormalizeGroup, GroupStdComesFromRewards) {
  Group g1, g2;
  for (double r : {0.0, 2.0}) g1.trajectories.push_back({0, {}, {}, r, 0.5});
  for (double r : {0.0, 4.0}) g2.trajectories.push_back({0, {}, {}, r, 0.5});
  g1.mean_reward = 1.0;
  g2.mean_reward = 2.0;
  g1.weight = g2.weight = 0.5;
  const auto recs = grae_records({g1, g2}, false);
  EXPECT_EQ(recs[0].group_std, 1.0);
  EXPECT_EQ(recs[2].group_std, 2.0);
  const auto out = apply_normalization(recs, Normalization::kGroup);
  EXPECT_EQ(out[1].normalized, 1.0);
  EXPECT_EQ(out[3].normalized, 1.0);
}

TEST(NormalizeGroup, DegenerateGroupPassesThrough) {
  const auto out = normalize_group(records_from({0.0, 0.0}, {0.0, 0.0}));
  EXPECT_TRUE(out[0].degenerate);
  EXPECT_EQ(out[0].normalized, 0.0);
}

TEST(Names, RoundTrip) {
  for (auto e : {Estimator::kGae, Estimator::kGrae, Estimator::kGraeLoo})
    EXPECT_EQ(parse_estimator(to_string(e)), e);
  for (auto n : {Normalization::kNone, Normalization::kBatch, Normalization::kGroup})
    EXPECT_EQ(parse_normalization(to_string(n)), n);
  EXPECT_THROW(parse_estimator("td"), std::invalid_argument);
}
