#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "turnrl/seeupo.hpp"
#include "turnrl/suites.hpp"
#include "turnrl/theory.hpp"

using namespace turnrl;

namespace {

TreeBanditSpec bandit(std::uint64_t seed, std::vector<int> actions, int states = 2,
                      double termination = 0.0) {
  TreeBanditShape shape;
  shape.actions_per_turn = std::move(actions);
  shape.min_states = shape.max_states = states;
  shape.random_initial_distribution = true;
  shape.termination_probability = termination;
  return generate_tree_bandit(seed, shape);
}

TreeBanditSpec worked_example() {
  TreeBanditSpec spec;
  spec.horizon = 2;
  spec.actions_per_turn = {2, 2};
  spec.reward_table = {{0.0, 1.0, 2.0, 0.0}};
  spec.initial_distribution = {1.0};
  spec.reward_bound = 2.0;
  return spec;
}

double block_prob(const TreePolicy& p, const HistoryKey& key, int a) {
  const auto block = p.table().logits(p.context(key));
  return oracle::softmax({block.begin(), block.end()})[a];
}

bool monotone(const ExperimentReport& report, double tol) {
  for (std::size_t i = 1; i < report.rows.size(); ++i)
    if (report.rows[i].j_exact < report.rows[i - 1].j_exact - tol) return false;
  return true;
}

}  // namespace

TEST(UpdateOrder, SequencesArePermutations) {
  Rng rng(1);
  EXPECT_EQ(turn_sequence(UpdateOrder::kReverse, 3, rng), (std::vector<int>{3, 2, 1}));
  EXPECT_EQ(turn_sequence(UpdateOrder::kNatural, 3, rng), (std::vector<int>{1, 2, 3}));
  for (int i = 0; i < 20; ++i) {
    auto seq = turn_sequence(UpdateOrder::kRandom, 5, rng);
    std::sort(seq.begin(), seq.end());
    EXPECT_EQ(seq, (std::vector<int>{1, 2, 3, 4, 5}));
  }
}

TEST(UpdateOrder, RandomOrderIsReproducible) {
  const auto spec = bandit(1, {2, 2, 2});
  RunSettings settings;
  settings.update = seeupo_suite_config();
  settings.iterations = 6;
  settings.seed = 31;
  auto p1 = make_tree_policy(spec), p2 = make_tree_policy(spec);
  const auto a = run_seeupo(spec, p1, settings, UpdateOrder::kRandom);
  const auto b = run_seeupo(spec, p2, settings, UpdateOrder::kRandom);
  std::set<std::vector<int>> distinct;
  for (std::size_t i = 1; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].turn_order, b.rows[i].turn_order);
    distinct.insert(a.rows[i].turn_order);
  }
  EXPECT_GT(distinct.size(), 1u);
  EXPECT_EQ(p1.snapshot(), p2.snapshot());
}

TEST(UpdateOrder, NamesRoundTrip) {
  for (auto o : {UpdateOrder::kReverse, UpdateOrder::kNatural, UpdateOrder::kRandom})
    EXPECT_EQ(parse_update_order(to_string(o)), o);
  EXPECT_THROW(parse_update_order("sideways"), std::invalid_argument);
}

TEST(InitM, CopiesAdvantages) {
  Group g;
  g.trajectories.resize(2);
  const std::vector<double> adv = {0.5, -0.5};
  const auto m = init_M({g}, adv);
  EXPECT_EQ(m.values, adv);
  EXPECT_TRUE(m.processed_turns.empty());
  const std::vector<double> short_adv = {0.5};
  EXPECT_THROW(init_M({g}, short_adv), std::invalid_argument);
}

TEST(InitM, ExactModeIsRewardMinusInitialValue) {
  const auto spec = bandit(2, {3, 2});
  auto policy = make_tree_policy(spec);
  randomize_logits(policy.table(), 1.0, 2);
  const auto groups = enumerate_batch(spec, policy);
  UpdateConfig config;
  std::vector<double> adv;
  for (const auto& r : joint_advantages(groups, config)) adv.push_back(r.normalized);
  const auto m = init_M(groups, adv);
  const auto values = exact_values(spec, policy);
  std::size_t i = 0;
  for (const auto& g : groups)
    for (const auto& tr : g.trajectories)
      EXPECT_NEAR(m.values[i++], tr.reward - values.initial[g.s0], 1e-12);
}

TEST(InitM, ZeroAdvantagesLeavePolicyUnchanged) {
  auto spec = bandit(3, {3, 3});
  for (auto& row : spec.reward_table) std::fill(row.begin(), row.end(), 0.25);
  spec.reward_bound = 0.25;
  auto policy = make_tree_policy(spec);
  randomize_logits(policy.table(), 1.0, 3);
  const auto before = policy.snapshot();
  RunSettings settings;
  settings.update = seeupo_suite_config();
  settings.update.normalization = Normalization::kNone;
  settings.iterations = 3;
  run_seeupo(spec, policy, settings, UpdateOrder::kReverse);
  EXPECT_EQ(policy.snapshot(), before);
}

TEST(UpdateM, UnchangedPolicyKeepsM) {
  const auto spec = bandit(4, {2, 3});
  const auto policy = make_tree_policy(spec);
  const auto groups = enumerate_batch(spec, policy);
  const auto pools = build_turn_pools(groups, spec.horizon);
  std::vector<double> adv(pools[0].samples.size(), 0.7);
  const auto m = update_M(init_M(groups, adv), pools[1], policy, policy);
  EXPECT_EQ(m.values, adv);
  EXPECT_EQ(m.processed_turns, (std::vector<int>{2}));
}

TEST(UpdateM, ScalesByTurnRatio) {
  TreeBanditSpec spec;
  spec.horizon = 1;
  spec.actions_per_turn = {2};
  spec.reward_table = {{1.0, 0.0}};
  spec.initial_distribution = {1.0};
  spec.reward_bound = 1.0;
  const auto start = make_tree_policy(spec);
  auto after = start;
  const std::vector<double> logits = {std::log(0.6), std::log(0.4)};
  after.set_logits({0, {}}, logits);
  Group g;
  g.trajectories.push_back({0, {0}, {std::log(0.5)}, 1.0, 1.0});
  const auto pools = build_turn_pools({g}, 1);
  const std::vector<double> adv = {2.0};
  EXPECT_NEAR(update_M(init_M({g}, adv), pools[0], after, start).values[0], 2.4, 1e-15);
}

TEST(UpdateM, EqualsAdvantageTimesSuffixRatio) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto spec = bandit(seed, {2, 3, 2}, 2, seed % 2 ? 0.3 : 0.0);
    auto policy = make_tree_policy(spec);
    randomize_logits(policy.table(), 0.5, seed);
    const TreePolicy start = policy;
    RunSettings settings;
    settings.update = seeupo_suite_config();
    settings.update.normalization = Normalization::kNone;
    const auto groups = enumerate_batch(spec, start);
    std::vector<double> adv;
    for (const auto& r : joint_advantages(groups, settings.update)) adv.push_back(r.normalized);
    Optimizer optimizer(settings.update);
    int boundaries = 0;
    seeupo_iteration(spec, policy, settings, UpdateOrder::kReverse, 1, optimizer,
                     [&](int, const MTable& m, const TreePolicy& now) {
                       ++boundaries;
                       std::size_t i = 0;
                       for (const auto& g : groups)
                         for (const auto& tr : g.trajectories) {
                           double ratio = 1.0;
                           for (int t : m.processed_turns) {
                             const int a = tr.actions[t - 1];
                             if (a == kNoOp) continue;
                             const HistoryKey key{tr.s0, {tr.actions.begin(), tr.actions.begin() + t - 1}};
                             ratio *= block_prob(now, key, a) / block_prob(start, key, a);
                           }
                           const double expected = adv[i] * ratio;
                           EXPECT_LE(std::abs(m.values[i] - expected), 1e-12 * std::max(1.0, std::abs(expected)));
                           ++i;
                         }
                     });
    EXPECT_EQ(boundaries, 3);
  }
}

TEST(TurnUpdate, ZeroMLeavesPolicyUnchanged) {
  const auto spec = bandit(5, {2, 2});
  auto policy = make_tree_policy(spec);
  const TreePolicy start = policy;
  const auto groups = enumerate_batch(spec, start);
  const auto pools = build_turn_pools(groups, 2);
  const std::vector<double> zeros(pools[0].samples.size(), 0.0);
  std::vector<double> weights;
  for (const auto& g : groups)
    for (const auto& tr : g.trajectories) weights.push_back(g.weight * tr.weight);
  UpdateConfig config;
  Optimizer optimizer(config);
  seeupo_turn_update(pools[1], init_M(groups, zeros), weights, policy, start, config, optimizer);
  EXPECT_EQ(policy.snapshot(), start.snapshot());
}

TEST(TurnUpdate, PlaceholdersContributeNoGradient) {
  auto spec = bandit(6, {2, 2, 2}, 1, 0.5);
  spec.terminal_prefixes = {{0, {0}}};
  validate(spec);
  auto policy = make_tree_policy(spec);
  randomize_logits(policy.table(), 1.0, 6);
  const auto groups = enumerate_batch(spec, policy);
  const auto pools = build_turn_pools(groups, 3);
  std::vector<double> adv, weights;
  for (const auto& r : joint_advantages(groups, UpdateConfig{})) {
    adv.push_back(r.normalized);
    weights.push_back(r.weight);
  }
  const auto m = init_M(groups, adv);
  for (const auto& pool : pools) {
    const auto units = turn_units(pool, m, weights, policy);
    std::vector<RatioUnit> real;
    bool any_placeholder = false;
    for (std::size_t i = 0; i < units.size(); ++i) {
      if (pool.samples[i].is_placeholder) {
        EXPECT_TRUE(units[i].steps.empty());
        any_placeholder = true;
      } else {
        real.push_back(units[i]);
      }
    }
    if (pool.turn > 1) {
      EXPECT_TRUE(any_placeholder);
    }
    EXPECT_EQ(ppu_gradient(units, policy.table(), policy.table(), 0.2).gradient,
              ppu_gradient(real, policy.table(), policy.table(), 0.2).gradient);
  }
}

TEST(Degeneracy, SingleTurnMatchesSequenceLevelPpu) {
  for (Mode mode : {Mode::kExact, Mode::kSampled}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto spec = bandit(seed, {4}, 3);
      RunSettings settings;
      settings.update = seeupo_suite_config();
      settings.update.normalization = Normalization::kNone;
      settings.update.learning_rate = 1.0;
      settings.mode = mode;
      settings.batch_size = 3;
      settings.group_size = 4;
      settings.seed = seed;
      settings.iterations = 10;
      std::vector<std::vector<double>> a, b;
      auto p1 = make_tree_policy(spec), p2 = make_tree_policy(spec);
      settings.on_iteration = [&](int, const SoftmaxTable& t) { a.push_back(t.flat()); };
      run_seeupo(spec, p1, settings, UpdateOrder::kReverse);
      settings.on_iteration = [&](int, const SoftmaxTable& t) { b.push_back(t.flat()); };
      run_algorithm(Algorithm::kGraePpuSeq, spec, p2, settings);
      EXPECT_EQ(a, b);
    }
  }
}

TEST(Iteration, ReverseOrderIsMonotoneInExactMode) {
  const auto spec = bandit(7, {3, 2, 3}, 2, 0.3);
  auto policy = make_tree_policy(spec);
  RunSettings settings;
  settings.update = seeupo_suite_config();
  settings.iterations = 200;
  const auto report = run_seeupo(spec, policy, settings, UpdateOrder::kReverse);
  EXPECT_TRUE(monotone(report, 1e-9));
}

TEST(Iteration, ReverseOrderReachesOptimumOnWorkedExample) {
  const auto spec = worked_example();
  auto policy = make_tree_policy(spec);
  RunSettings settings;
  settings.update = seeupo_suite_config();
  settings.iterations = 500;
  settings.j_star = backward_induction(spec).j_star;
  const auto report = run_seeupo(spec, policy, settings, UpdateOrder::kReverse);
  EXPECT_EQ(*settings.j_star, 2.0);
  EXPECT_LE(*report.rows.back().gap_to_optimal, 1e-3);
  EXPECT_EQ(report.rows.back().order, "reverse");
  EXPECT_EQ(report.rows.back().turn_order, (std::vector<int>{2, 1}));
}

TEST(Iteration, RejectsEstimatorsItCannotUse) {
  const auto spec = worked_example();
  auto policy = make_tree_policy(spec);
  RunSettings settings;
  settings.update.estimator = Estimator::kGae;
  EXPECT_THROW(run_seeupo(spec, policy, settings, UpdateOrder::kReverse), std::invalid_argument);
  settings.update.estimator = Estimator::kGraeLoo;
  EXPECT_THROW(run_seeupo(spec, policy, settings, UpdateOrder::kReverse), std::invalid_argument);
}
