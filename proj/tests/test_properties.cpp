#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "turnrl/random.hpp"
#include "turnrl/seeupo.hpp"
#include "turnrl/suites.hpp"
#include "turnrl/theory.hpp"
#include "turnrl/verification.hpp"

using namespace turnrl;

namespace {

class SeedProperty : public ::testing::TestWithParam<std::uint64_t> {};

TreeBanditSpec any_bandit(std::uint64_t seed) {
  TreeBanditShape shape;
  shape.max_states = 3;
  shape.min_turns = 1;
  shape.max_turns = 3;
  shape.max_actions = 4;
  shape.reward_min = -1.0;
  shape.termination_probability = seed % 3 == 0 ? 0.3 : 0.0;
  shape.random_initial_distribution = true;
  return generate_tree_bandit(seed, shape);
}

FiniteMdpSpec any_mdp(std::uint64_t seed) {
  FiniteMdpShape shape;
  shape.max_states = 4;
  shape.max_actions = 3;
  shape.max_horizon = 3;
  shape.reward_min = -1.0;
  shape.deterministic_transitions = seed % 4 == 0;
  return generate_finite_mdp(seed, shape);
}

}  // namespace

TEST_P(SeedProperty, GeneratedSpecsRevalidate) {
  EXPECT_NO_THROW(validate(any_bandit(GetParam())));
  EXPECT_NO_THROW(validate(any_mdp(GetParam())));
}

TEST_P(SeedProperty, EpisodeProbabilitiesSumToOne) {
  const auto spec = any_bandit(GetParam());
  auto policy = make_tree_policy(spec);
  randomize_logits(policy.table(), 2.0, GetParam());
  for (int s0 = 0; s0 < spec.num_initial_states; ++s0) {
    double total = 0.0;
    for (const auto& e : enumerate_episodes(spec, s0)) total += oracle::tree_path_prob(policy, s0, e.actions);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST_P(SeedProperty, ProbabilitiesNormalizedAtEveryKey) {
  const auto spec = any_bandit(GetParam());
  auto policy = make_tree_policy(spec);
  randomize_logits(policy.table(), 5.0, GetParam());
  for (const auto& key : policy.keys()) {
    const auto p = policy.action_probs(key);
    EXPECT_LE(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0), 1e-12);
  }
}

TEST_P(SeedProperty, GroupMeansAreExactValues) {
  const auto spec = any_bandit(GetParam());
  const auto policy = suite_policy(spec, GetParam(), 0);
  const auto values = exact_values(spec, policy);
  for (const auto& g : enumerate_batch(spec, policy))
    EXPECT_NEAR(g.mean_reward, values.initial[g.s0], 1e-10);
}

TEST_P(SeedProperty, BanditGraeIsUnbiased) {
  const auto spec = any_bandit(GetParam());
  const auto policy = suite_policy(spec, GetParam(), 1);
  const auto groups = enumerate_batch(spec, policy);
  const auto records = grae_records(groups, false);
  std::size_t k = 0;
  for (const auto& g : groups) {
    double v0 = 0.0;
    for (const auto& e : enumerate_episodes(spec, g.s0))
      v0 += oracle::tree_path_prob(policy, g.s0, e.actions) * e.reward;
    for (const auto& tr : g.trajectories) EXPECT_NEAR(records[k++].raw, tr.reward - v0, 1e-12);
  }
}

TEST_P(SeedProperty, GaeWithTrueValuesIsUnbiased) {
  const auto spec = any_mdp(GetParam());
  const auto policy = suite_policy(spec, GetParam(), 0);
  const double gamma = 0.5 + 0.05 * static_cast<double>(GetParam() % 10);
  const auto values = exact_values(spec, policy, gamma);
  const auto gae = expected_gae(spec, policy, values.v, gamma, 0.9);
  for (int t = 0; t < spec.horizon; ++t)
    for (int s = 0; s < spec.num_states; ++s)
      for (int a = 0; a < spec.num_actions; ++a)
        EXPECT_NEAR(gae[t][s][a], values.advantage(s, a, t), 1e-10);
}

TEST_P(SeedProperty, BatchNormalizationStandardizes) {
  Rng rng(GetParam());
  std::vector<AdvantageRecord> recs(rng.uniform_int(2, 30));
  for (auto& r : recs) {
    r.raw = rng.normal(3.0, 2.0);
    r.weight = rng.uniform(0.1, 1.0);
  }
  const auto out = normalize_batch(recs);
  double w = 0.0, mean = 0.0, var = 0.0;
  for (const auto& r : out) {
    w += r.weight;
    mean += r.weight * r.normalized;
  }
  mean /= w;
  for (const auto& r : out) var += r.weight * (r.normalized - mean) * (r.normalized - mean);
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(std::sqrt(var / w), 1.0, 1e-12);
}

TEST_P(SeedProperty, NeutralDriftsVanishAtOrigin) {
  Rng rng(GetParam());
  std::vector<double> p(3), a(3);
  double s = 0.0;
  for (double& x : p) s += (x = rng.uniform(0.05, 1.0));
  for (double& x : p) x /= s;
  for (double& x : a) x = rng.uniform(-2, 2);
  EXPECT_EQ(evaluate_drift(DriftKind::kPpu, p, p, a, 0.0, 0.2), 0.0);
  EXPECT_EQ(evaluate_drift(DriftKind::kGraePpu, p, p, a, 0.0, 0.2), 0.0);
  EXPECT_EQ(evaluate_drift(DriftKind::kGspo, p, p, a, 1.0, 0.2), 0.0);
  EXPECT_NEAR(evaluate_drift(DriftKind::kGraePpu, p, p, a, 3.5, 0.2), -3.5, 1e-12);
}

TEST_P(SeedProperty, OraclesAgree) {
  const auto spec = seeupo_suite(GetParam(), 1)[0];
  EXPECT_EQ(backward_induction(spec).j_star, brute_force_optimal(spec).j_star);
}

TEST_P(SeedProperty, SeeUpoReverseNeverDecreasesExactReturn) {
  const auto spec = any_bandit(GetParam());
  auto policy = make_tree_policy(spec);
  RunSettings settings;
  settings.update = seeupo_suite_config();
  settings.iterations = 40;
  const auto report = run_seeupo(spec, policy, settings, UpdateOrder::kReverse);
  for (std::size_t i = 1; i < report.rows.size(); ++i)
    EXPECT_GE(report.rows[i].j_exact, report.rows[i - 1].j_exact - 1e-9) << i;
}

TEST_P(SeedProperty, TurnPoolsPartitionSampledBatches) {
  const auto spec = any_bandit(GetParam());
  const auto groups = collect_batch(spec, make_tree_policy(spec), 3, 4, GetParam());
  const auto pools = build_turn_pools(groups, spec.horizon);
  ASSERT_EQ(static_cast<int>(pools.size()), spec.horizon);
  for (const auto& pool : pools) EXPECT_EQ(pool.samples.size(), 12u);
}

INSTANTIATE_TEST_SUITE_P(Seeds, SeedProperty, ::testing::Range<std::uint64_t>(0, 20));

TEST(Parallelism, ResultsIndependentOfThreadCount) {
  VerifyOptions one, four;
  four.threads = 4;
  for (const char* id : {"gae-unbiased", "bandit-unbiased", "oracle-crosscheck"}) {
    const auto a = run_check(id, one);
    const auto b = run_check(id, four);
    EXPECT_EQ(a.passed, b.passed);
    EXPECT_EQ(a.details.dump(), b.details.dump()) << id;
  }
}

TEST(Parallelism, ParallelForVisitsEveryIndexOnce) {
  std::vector<int> hits(1000, 0);
  parallel_for(1000, 8, [&](int i) { ++hits[i]; });
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Parallelism, ParallelForRethrows) {
  EXPECT_THROW(parallel_for(10, 3, [](int i) {
                 if (i == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}
