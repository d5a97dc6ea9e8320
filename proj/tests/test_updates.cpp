#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "turnrl/advantage.hpp"
#include "turnrl/random.hpp"
#include "turnrl/theory.hpp"
#include "turnrl/updates.hpp"

using namespace turnrl;

namespace {

TreeBanditSpec bandit(std::uint64_t seed, std::vector<int> actions = {3, 2}, int states = 2) {
  TreeBanditShape shape;
  shape.actions_per_turn = std::move(actions);
  shape.min_states = shape.max_states = states;
  shape.random_initial_distribution = true;
  return generate_tree_bandit(seed, shape);
}

FiniteMdpSpec mdp(std::uint64_t seed, int horizon = 3) {
  FiniteMdpShape shape;
  shape.min_states = shape.max_states = 3;
  shape.min_horizon = shape.max_horizon = horizon;
  shape.reward_min = -1.0;
  return generate_finite_mdp(seed, shape);
}

SoftmaxTable two_action_table(double p0) {
  SoftmaxTable t({2});
  t.set_flat({std::log(p0), std::log(1.0 - p0)});
  return t;
}

// Exact GRAE units for a tree bandit: one sequence unit per path.
std::vector<RatioUnit> exact_units(const TreeBanditSpec& spec, const TreePolicy& policy) {
  const auto groups = enumerate_batch(spec, policy);
  return sequence_units(groups, grae_records(groups, false), policy);
}

bool monotone(const ExperimentReport& report, double tol) {
  for (std::size_t i = 1; i < report.rows.size(); ++i)
    if (report.rows[i].j_exact < report.rows[i - 1].j_exact - tol) return false;
  return true;
}

}  // namespace

TEST(UpdateConfig, RejectsInvalidValues) {
  UpdateConfig c;
  c.clip_epsilon = 0.0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = UpdateConfig{};
  c.learning_rate = -1.0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = UpdateConfig{};
  c.epochs_per_batch = 0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  EXPECT_NO_THROW(validate(UpdateConfig{}));
}

TEST(Reinforce, ZeroAdvantagesGiveZeroGradient) {
  const auto spec = bandit(1);
  const auto policy = make_tree_policy(spec);
  auto units = exact_units(spec, policy);
  for (auto& u : units) u.advantage = 0.0;
  for (double g : reinforce_gradient(policy.table(), units)) EXPECT_EQ(g, 0.0);
}

TEST(Reinforce, SingleSampleScoreFunction) {
  const SoftmaxTable table({2});
  const std::vector<RatioUnit> units = {{1.0, 1.0, {{0, 0}}}};
  EXPECT_EQ(reinforce_gradient(table, units), (std::vector<double>{0.5, -0.5}));
}

TEST(Reinforce, ExactGraeGradientIsPolicyGradient) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto spec = bandit(seed, {2, 3, 2});
    auto policy = make_tree_policy(spec);
    randomize_logits(policy.table(), 1.0, seed);
    const auto g = reinforce_gradient(policy.table(), exact_units(spec, policy));
    const auto fd = oracle::fd_gradient(policy.table(), [&](const SoftmaxTable& t) {
      TreePolicy p = policy;
      p.table() = t;
      return oracle::tree_return(spec, p);
    });
    EXPECT_LT(oracle::max_abs_diff(g, fd), 1e-8);
  }
}

TEST(Reinforce, StateDependentBaselineLeavesGradientUnchanged) {
  const auto spec = mdp(3);
  auto policy = make_mdp_policy(spec);
  randomize_logits(policy.table(), 1.0, 3);
  const auto values = exact_values(spec, policy, 1.0);
  const auto occ = state_occupancy(spec, policy);
  const auto probs = policy.table().all_probs();
  Rng rng(5);
  std::vector<RatioUnit> plain, shifted;
  for (int t = 0; t < spec.horizon; ++t)
    for (int s = 0; s < spec.num_states; ++s) {
      const double b = rng.uniform(-3, 3);
      const int ctx = t * spec.num_states + s;
      for (int a = 0; a < spec.num_actions; ++a) {
        const double w = occ[t][s] * probs[policy.table().offset(ctx) + a];
        plain.push_back({w, values.q[t][s][a], {{ctx, a}}});
        shifted.push_back({w, values.q[t][s][a] + b, {{ctx, a}}});
      }
    }
  EXPECT_LT(oracle::max_abs_diff(reinforce_gradient(policy.table(), plain),
                                 reinforce_gradient(policy.table(), shifted)),
            1e-10);
}

TEST(PpuObjective, CandidateEqualsOldGivesMeanAdvantage) {
  const auto spec = bandit(2);
  auto policy = make_tree_policy(spec);
  randomize_logits(policy.table(), 1.0, 2);
  const auto units = exact_units(spec, policy);
  double mean = 0.0;
  for (const auto& u : units) mean += u.weight * u.advantage;
  EXPECT_NEAR(ppu_objective(units, policy.table(), policy.table(), 0.2), mean, 1e-15);
}

TEST(PpuObjective, PiecewiseFormForNegativeAdvantage) {
  const auto old = two_action_table(0.5);
  const std::vector<RatioUnit> units = {{1.0, -5.0, {{0, 0}}}};
  for (double r : {0.5, 0.7, 0.79, 0.81, 1.0, 1.3, 1.9}) {
    const double expected = r >= 0.8 ? -5.0 * r : -4.0;
    EXPECT_NEAR(ppu_objective(units, two_action_table(0.5 * r), old, 0.2), expected, 1e-12) << r;
  }
}

TEST(PpuObjective, PiecewiseFormForPositiveAdvantage) {
  const auto old = two_action_table(0.5);
  const std::vector<RatioUnit> units = {{1.0, 5.0, {{0, 0}}}};
  for (double r : {0.3, 0.9, 1.0, 1.19, 1.21, 1.6, 1.99}) {
    const double expected = r <= 1.2 ? 5.0 * r : 6.0;
    EXPECT_NEAR(ppu_objective(units, two_action_table(0.5 * r), old, 0.2), expected, 1e-12) << r;
  }
}

TEST(PpuObjective, ClippingDirectionsReverseWithAdvantageSign) {
  const double h = 1e-6;
  const double slope_true = (clipped_term(1 + h, -5.0, 0.2) - clipped_term(1 - h, -5.0, 0.2)) / (2 * h);
  const double slope_grae = (clipped_term(1 + h, 5.0, 0.2) - clipped_term(1 - h, 5.0, 0.2)) / (2 * h);
  EXPECT_LT(slope_true, 0.0);
  EXPECT_GT(slope_grae, 0.0);
}

TEST(PpuGradient, AtOldPolicyEqualsReinforce) {
  const auto spec = bandit(4);
  auto policy = make_tree_policy(spec);
  randomize_logits(policy.table(), 1.0, 4);
  auto units = exact_units(spec, policy);
  for (auto& u : units) u.advantage = std::abs(u.advantage) + 0.1;
  const auto pg = ppu_gradient(units, policy.table(), policy.table(), 0.2);
  EXPECT_LT(oracle::max_abs_diff(pg.gradient, reinforce_gradient(policy.table(), units)), 1e-15);
  EXPECT_EQ(pg.clip_fraction, 0.0);
}

TEST(PpuGradient, ClippedSampleContributesNothing) {
  const auto old = two_action_table(0.5);
  const auto candidate = two_action_table(0.65);  // r = 1.3
  const std::vector<RatioUnit> units = {{1.0, 2.0, {{0, 0}}}};
  const auto pg = ppu_gradient(units, candidate, old, 0.2);
  EXPECT_EQ(pg.gradient, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(pg.clip_fraction, 1.0);
}

TEST(PpuGradient, MatchesFiniteDifferencesAwayFromKinks) {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto spec = bandit(seed, {3, 3});
    auto old_policy = make_tree_policy(spec);
    randomize_logits(old_policy.table(), 1.0, seed);
    auto candidate = old_policy;
    auto flat = candidate.table().flat();
    Rng rng(seed);
    for (double& x : flat) x += rng.normal(0.0, 0.15);
    candidate.table().set_flat(flat);
    auto units = exact_units(spec, old_policy);
    for (auto& u : units) u.advantage = rng.normal();
    const auto lc = all_log_probs(candidate.table());
    const auto lo = all_log_probs(old_policy.table());
    bool near_kink = false;
    for (const auto& u : units) {
      const double r = unit_ratio(u, lc, lo, old_policy.table());
      near_kink |= std::abs(r - 0.8) < 1e-3 || std::abs(r - 1.2) < 1e-3;
    }
    if (near_kink) continue;
    ++checked;
    const auto pg = ppu_gradient(units, candidate.table(), old_policy.table(), 0.2);
    const auto fd = oracle::fd_gradient(candidate.table(), [&](const SoftmaxTable& t) {
      return ppu_objective(units, t, old_policy.table(), 0.2);
    });
    EXPECT_LT(oracle::max_abs_diff(pg.gradient, fd), 1e-6);
  }
  EXPECT_GE(checked, 10);
}

TEST(PpuGradient, PositivelyHomogeneousInAdvantages) {
  const auto spec = bandit(6);
  auto old_policy = make_tree_policy(spec);
  randomize_logits(old_policy.table(), 1.0, 6);
  auto candidate = old_policy;
  randomize_logits(candidate.table(), 1.0, 7);
  auto units = exact_units(spec, old_policy);
  auto scaled = units;
  for (auto& u : scaled) u.advantage *= 4.0;
  const auto g1 = ppu_gradient(units, candidate.table(), old_policy.table(), 0.2).gradient;
  const auto g4 = ppu_gradient(scaled, candidate.table(), old_policy.table(), 0.2).gradient;
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_EQ(g4[i], 4.0 * g1[i]);
}

TEST(PpuGradient, BatchNormalizationRemovesRewardScale) {
  const auto spec = bandit(8);
  auto scaled_spec = spec;
  for (auto& row : scaled_spec.reward_table)
    for (double& r : row) r *= 3.0;
  scaled_spec.reward_bound *= 3.0;
  auto policy = make_tree_policy(spec);
  randomize_logits(policy.table(), 1.0, 8);
  UpdateConfig config;
  config.normalization = Normalization::kBatch;
  const auto a = joint_advantages(enumerate_batch(spec, policy), config);
  const auto b = joint_advantages(enumerate_batch(scaled_spec, policy), config);
  EXPECT_NEAR(b[0].batch_std, 3.0 * a[0].batch_std, 1e-12);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i].normalized, b[i].normalized, 1e-12);
}

TEST(RunAlgorithm, GraeReinforceIsMonotoneInExactMode) {
  const auto spec = bandit(9, {3, 3, 2}, 3);
  auto policy = make_tree_policy(spec);
  RunSettings settings;
  settings.update.learning_rate = 0.5;
  settings.iterations = 200;
  const auto report = run_algorithm(Algorithm::kGraeReinforce, spec, policy, settings);
  ASSERT_EQ(report.rows.size(), 201u);
  EXPECT_TRUE(monotone(report, 1e-9));
  EXPECT_GT(report.rows.back().j_exact, report.rows.front().j_exact);
}

TEST(RunAlgorithm, GaePpuIsMonotoneInExactMode) {
  const auto spec = mdp(10, 4);
  auto policy = make_mdp_policy(spec);
  RunSettings settings;
  settings.update.estimator = Estimator::kGae;
  settings.update.learning_rate = 0.2;
  settings.update.epochs_per_batch = 1;
  settings.iterations = 100;
  const auto report = run_algorithm(Algorithm::kGaePpu, spec, policy, settings);
  EXPECT_TRUE(monotone(report, 1e-9));
  EXPECT_GT(report.rows.back().j_exact, report.rows.front().j_exact);
}

TEST(RunAlgorithm, GraePpuTokenDegradesOnSingleTrajectoryBatch) {
  const auto report = reproduce_degradation();
  EXPECT_LT(report.j_after_grae, report.j_before);
  EXPECT_GT(report.j_after_true, report.j_before);
}

TEST(RunAlgorithm, SampledRunIsReproducible) {
  const auto spec = bandit(11);
  RunSettings settings;
  settings.mode = Mode::kSampled;
  settings.batch_size = 3;
  settings.iterations = 5;
  settings.seed = 4;
  auto p1 = make_tree_policy(spec), p2 = make_tree_policy(spec);
  const auto r1 = run_algorithm(Algorithm::kGraePpuSeq, spec, p1, settings);
  const auto r2 = run_algorithm(Algorithm::kGraePpuSeq, spec, p2, settings);
  EXPECT_EQ(p1.snapshot(), p2.snapshot());
  for (std::size_t i = 0; i < r1.rows.size(); ++i) EXPECT_EQ(r1.rows[i].j_exact, r2.rows[i].j_exact);
}

TEST(RunAlgorithm, RejectsInvalidCombinations) {
  const auto spec = bandit(12);
  auto policy = make_tree_policy(spec);
  RunSettings settings;
  settings.update.estimator = Estimator::kGae;
  EXPECT_THROW(run_algorithm(Algorithm::kGraePpuSeq, spec, policy, settings), std::invalid_argument);
  settings.update.estimator = Estimator::kGraeLoo;
  EXPECT_THROW(run_algorithm(Algorithm::kGraeReinforce, spec, policy, settings), std::invalid_argument);
  settings.update = UpdateConfig{};
  EXPECT_THROW(run_algorithm(Algorithm::kSeeUpo, spec, policy, settings), std::invalid_argument);
  const auto m = mdp(1);
  auto mp = make_mdp_policy(m);
  EXPECT_THROW(run_algorithm(Algorithm::kGraePpuSeq, m, mp, settings), std::invalid_argument);
  const auto uneven = bandit(1, {2, 3});
  auto up = make_tree_policy(uneven);
  EXPECT_THROW(run_algorithm(Algorithm::kGraePpuToken, uneven, up, settings), std::invalid_argument);
}

TEST(RunAlgorithm, TokenLevelOnTreeRunsOnTokenView) {
  const auto spec = bandit(13, {3, 3});
  auto policy = make_tree_policy(spec);
  RunSettings settings;
  settings.iterations = 3;
  const auto report = run_algorithm(Algorithm::kGraePpuToken, spec, policy, settings);
  EXPECT_NEAR(report.rows.back().j_exact, exact_return(spec, policy), 1e-12);
}

TEST(Optimizer, AdaptiveStepsDifferFromPlain) {
  UpdateConfig plain, adam;
  adam.adaptive = true;
  SoftmaxTable a({3}), b({3});
  const std::vector<double> g = {1.0, 0.1, -1.1};
  Optimizer(plain).step(a, g);
  Optimizer(adam).step(b, g);
  EXPECT_NEAR(a.flat()[1], 0.1 * plain.learning_rate, 1e-15);
  EXPECT_NEAR(b.flat()[1], adam.learning_rate, 1e-6);
}

TEST(Names, AlgorithmsRoundTrip) {
  for (auto a : {Algorithm::kGaePpu, Algorithm::kGraeReinforce, Algorithm::kGraePpuToken,
                 Algorithm::kGraePpuSeq, Algorithm::kSeeUpo})
    EXPECT_EQ(parse_algorithm(to_string(a)), a);
  EXPECT_EQ(parse_algorithm("GRPO-like"), Algorithm::kGraePpuToken);
  EXPECT_THROW(parse_algorithm("A2C"), std::invalid_argument);
}
