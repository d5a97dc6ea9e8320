#include "turnrl/suites.hpp"

#include "turnrl/random.hpp"
#include "turnrl/theory.hpp"

namespace turnrl {

std::vector<FiniteMdpSpec> mdp_suite(std::uint64_t seed, int count, RewardTiming timing,
                                     double discount) {
  FiniteMdpShape shape;
  shape.min_states = 2;
  shape.max_states = 5;
  shape.min_actions = 2;
  shape.max_actions = 3;
  shape.min_horizon = 2;
  shape.max_horizon = 4;
  shape.discount = discount;
  shape.reward_min = -1.0;
  shape.reward_max = 1.0;
  shape.reward_timing = timing;
  std::vector<FiniteMdpSpec> out;
  for (int i = 0; i < count; ++i) out.push_back(generate_finite_mdp(derive_seed(seed, "suite.mdp", i), shape));
  return out;
}

std::vector<TreeBanditSpec> tree_bandit_suite(std::uint64_t seed, int count) {
  std::vector<TreeBanditSpec> out;
  for (int i = 0; i < count; ++i) {
    TreeBanditShape shape;
    shape.min_states = 1;
    shape.max_states = 3;
    shape.min_turns = 1;
    shape.max_turns = 3;
    shape.min_actions = 2;
    shape.max_actions = 4;
    shape.random_initial_distribution = true;
    shape.termination_probability = i % 5 == 4 ? 0.3 : 0.0;
    out.push_back(generate_tree_bandit(derive_seed(seed, "suite.tree", i), shape));
  }
  return out;
}

std::vector<TreeBanditSpec> seeupo_suite(std::uint64_t seed, int count) {
  std::vector<TreeBanditSpec> out;
  for (int i = 0; i < count; ++i) {
    Rng rng = Rng::derive(seed, "suite.seeupo.shape", i);
    TreeBanditShape shape;
    shape.min_states = 1;
    shape.max_states = 3;
    shape.random_initial_distribution = true;
    shape.termination_probability = i % 5 == 4 ? 0.3 : 0.0;
    const int turns = 2 + i % 2;
    while (true) {
      shape.actions_per_turn.clear();
      for (int t = 0; t < turns; ++t) shape.actions_per_turn.push_back(rng.uniform_int(2, 4));
      auto spec = generate_tree_bandit(derive_seed(seed, "suite.seeupo", i), shape);
      bool small = true;
      for (int s0 = 0; s0 < spec.num_initial_states; ++s0)
        small = small && deterministic_policy_count(spec, s0) <= kBruteForceCap;
      if (small) {
        out.push_back(std::move(spec));
        break;
      }
    }
  }
  return out;
}

std::vector<TreeBanditSpec> single_turn_suite(std::uint64_t seed, int count) {
  std::vector<TreeBanditSpec> out;
  for (int i = 0; i < count; ++i) {
    TreeBanditShape shape;
    shape.min_states = 1;
    shape.max_states = 3;
    shape.min_turns = 1;
    shape.max_turns = 1;
    shape.min_actions = 2;
    shape.max_actions = 5;
    shape.random_initial_distribution = true;
    out.push_back(generate_tree_bandit(derive_seed(seed, "suite.single_turn", i), shape));
  }
  return out;
}

MdpPolicy suite_policy(const FiniteMdpSpec& spec, std::uint64_t seed, int index, double sigma) {
  auto policy = make_mdp_policy(spec);
  randomize_logits(policy.table(), sigma, derive_seed(seed, "suite.policy", index));
  return policy;
}

TreePolicy suite_policy(const TreeBanditSpec& spec, std::uint64_t seed, int index, double sigma) {
  auto policy = make_tree_policy(spec);
  randomize_logits(policy.table(), sigma, derive_seed(seed, "suite.policy", index));
  return policy;
}

UpdateConfig seeupo_suite_config() {
  UpdateConfig config;
  config.learning_rate = 8.0;
  config.epochs_per_batch = 8;
  config.clip_epsilon = 0.2;
  config.normalization = Normalization::kBatch;
  config.estimator = Estimator::kGrae;
  return config;
}

}  // namespace turnrl
