#include "turnrl/experiment.hpp"

#include <set>
#include <stdexcept>

#include "turnrl/suites.hpp"
#include "turnrl/theory.hpp"

namespace turnrl {

namespace {

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + ": expected an object");
  const std::set<std::string_view> ok(allowed);
  for (const auto& item : j.items()) {
    if (!ok.contains(item.key()))
      throw std::invalid_argument(std::string(what) + ": unknown field '" + item.key() + "'");
  }
}

Mode parse_mode(const std::string& name) {
  if (name == "exact") return Mode::kExact;
  if (name == "sampled") return Mode::kSampled;
  throw std::invalid_argument("unknown mode: " + name);
}

// Validates the algorithm/estimator pairing up front, before any file is
// written.
void check_algorithm(const ExperimentConfig& c, const Environment& env) {
  const auto& u = c.settings.update;
  const bool tree = std::holds_alternative<TreeBanditSpec>(env);
  if (c.settings.mode == Mode::kExact && u.estimator == Estimator::kGraeLoo)
    throw std::invalid_argument("leave-one-out baselines are only defined for sampled groups");
  if ((c.algorithm == Algorithm::kGaePpu) != (u.estimator == Estimator::kGae))
    throw std::invalid_argument(std::string(to_string(c.algorithm)) + " cannot use the " +
                                std::string(to_string(u.estimator)) + " estimator");
  if (u.estimator == Estimator::kGae && u.normalization == Normalization::kGroup)
    throw std::invalid_argument("group normalization needs a group-relative estimator");
  if (!tree && (c.algorithm == Algorithm::kSeeUpo || c.algorithm == Algorithm::kGraePpuSeq))
    throw std::invalid_argument(std::string(to_string(c.algorithm)) + " needs a tree bandit");
  if (c.policy_init == "reference" && c.environment.kind != "degradation")
    throw std::invalid_argument("the reference policy exists only for the degradation environment");
  if (c.settings.mode == Mode::kSampled && (c.settings.batch_size < 1 || c.settings.group_size < 1))
    throw std::invalid_argument("batch and group sizes must be positive");
  if (c.settings.iterations < 0) throw std::invalid_argument("iterations must be non-negative");
}

}  // namespace

TreeBanditShape tree_shape_from_json(const Json& j) {
  check_keys(j, {"min_states", "max_states", "min_turns", "max_turns", "turns", "actions_per_turn",
                 "min_actions", "max_actions", "actions", "reward_min", "reward_max",
                 "termination_probability", "random_initial_distribution"},
             "tree shape");
  TreeBanditShape s;
  s.min_states = j.value("min_states", s.min_states);
  s.max_states = j.value("max_states", std::max(s.max_states, s.min_states));
  if (j.contains("turns")) s.min_turns = s.max_turns = j.at("turns").get<int>();
  s.min_turns = j.value("min_turns", s.min_turns);
  s.max_turns = j.value("max_turns", std::max(s.max_turns, s.min_turns));
  if (j.contains("actions")) s.min_actions = s.max_actions = j.at("actions").get<int>();
  s.min_actions = j.value("min_actions", s.min_actions);
  s.max_actions = j.value("max_actions", std::max(s.max_actions, s.min_actions));
  s.actions_per_turn = j.value("actions_per_turn", s.actions_per_turn);
  s.reward_min = j.value("reward_min", s.reward_min);
  s.reward_max = j.value("reward_max", s.reward_max);
  s.termination_probability = j.value("termination_probability", s.termination_probability);
  s.random_initial_distribution = j.value("random_initial_distribution", s.random_initial_distribution);
  return s;
}

FiniteMdpShape mdp_shape_from_json(const Json& j) {
  check_keys(j, {"min_states", "max_states", "states", "min_actions", "max_actions", "actions",
                 "min_horizon", "max_horizon", "horizon", "discount", "reward_min", "reward_max",
                 "deterministic_transitions", "random_initial_distribution", "reward_timing"},
             "mdp shape");
  FiniteMdpShape s;
  if (j.contains("states")) s.min_states = s.max_states = j.at("states").get<int>();
  s.min_states = j.value("min_states", s.min_states);
  s.max_states = j.value("max_states", std::max(s.max_states, s.min_states));
  if (j.contains("actions")) s.min_actions = s.max_actions = j.at("actions").get<int>();
  s.min_actions = j.value("min_actions", s.min_actions);
  s.max_actions = j.value("max_actions", std::max(s.max_actions, s.min_actions));
  if (j.contains("horizon")) s.min_horizon = s.max_horizon = j.at("horizon").get<int>();
  s.min_horizon = j.value("min_horizon", s.min_horizon);
  s.max_horizon = j.value("max_horizon", std::max(s.max_horizon, s.min_horizon));
  s.discount = j.value("discount", s.discount);
  s.reward_min = j.value("reward_min", s.reward_min);
  s.reward_max = j.value("reward_max", s.reward_max);
  s.deterministic_transitions = j.value("deterministic_transitions", s.deterministic_transitions);
  s.random_initial_distribution = j.value("random_initial_distribution", s.random_initial_distribution);
  if (j.contains("reward_timing")) {
    const auto t = j.at("reward_timing").get<std::string>();
    if (t == "every_step") {
      s.reward_timing = RewardTiming::kEveryStep;
    } else if (t == "final_step") {
      s.reward_timing = RewardTiming::kFinalStep;
    } else {
      throw std::invalid_argument("unknown reward timing: " + t);
    }
  }
  return s;
}

ExperimentConfig parse_experiment_config(const Json& j, const std::filesystem::path& base_dir) {
  check_keys(j, {"environment", "algorithm", "update", "iterations", "mode", "batch_size",
                 "group_size", "order", "seed", "policy", "output", "oracle"},
             "config");
  ExperimentConfig c;
  const Json& e = j.at("environment");
  check_keys(e, {"kind", "file", "seed", "shape", "index"}, "environment");
  c.environment.kind = e.value("kind", std::string("tree"));
  static const std::set<std::string> kinds = {"tree", "mdp", "suite", "degradation", "discount-witness"};
  if (!kinds.contains(c.environment.kind))
    throw std::invalid_argument("unknown environment kind: " + c.environment.kind);
  if (e.contains("file")) {
    std::filesystem::path p = e.at("file").get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    if (!std::filesystem::exists(p)) throw std::invalid_argument("environment file not found: " + p.string());
    c.environment.file = p;
  }
  c.environment.seed = e.value("seed", std::uint64_t{0});
  c.environment.shape = e.value("shape", Json::object());
  c.environment.index = e.value("index", 0);

  c.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  UpdateConfig defaults;
  if (c.algorithm == Algorithm::kGaePpu) defaults.estimator = Estimator::kGae;
  if (c.algorithm == Algorithm::kSeeUpo) defaults = seeupo_suite_config();
  c.settings.update = update_config_from_json(j.value("update", Json::object()), defaults);
  c.settings.iterations = j.value("iterations", 100);
  c.settings.mode = parse_mode(j.value("mode", std::string("exact")));
  c.settings.batch_size = j.value("batch_size", 8);
  c.settings.group_size = j.value("group_size", 4);
  c.settings.seed = j.value("seed", std::uint64_t{0});
  c.order = parse_update_order(j.value("order", std::string("reverse")));
  c.oracle = j.value("oracle", true);
  if (j.contains("policy")) {
    const Json& p = j.at("policy");
    check_keys(p, {"init", "sigma"}, "policy");
    c.policy_init = p.value("init", c.policy_init);
    c.policy_sigma = p.value("sigma", c.policy_sigma);
    if (c.policy_init != "uniform" && c.policy_init != "random" && c.policy_init != "reference")
      throw std::invalid_argument("unknown policy init: " + c.policy_init);
  }
  if (j.contains("output")) {
    const Json& o = j.at("output");
    check_keys(o, {"dir", "name"}, "output");
    std::filesystem::path dir = o.value("dir", std::string("."));
    c.output_dir = dir.is_relative() ? base_dir / dir : dir;
    c.output_name = o.value("name", c.output_name);
  } else {
    c.output_dir = base_dir;
  }
  check_algorithm(c, load_environment(c.environment));
  return c;
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  Json e;
  e["kind"] = c.environment.kind;
  if (c.environment.file) e["file"] = c.environment.file->filename().string();
  e["seed"] = c.environment.seed;
  e["shape"] = c.environment.shape;
  e["index"] = c.environment.index;
  j["environment"] = e;
  j["algorithm"] = to_string(c.algorithm);
  j["update"] = to_json(c.settings.update);
  j["iterations"] = c.settings.iterations;
  j["mode"] = c.settings.mode == Mode::kExact ? "exact" : "sampled";
  j["batch_size"] = c.settings.batch_size;
  j["group_size"] = c.settings.group_size;
  j["order"] = to_string(c.order);
  j["seed"] = c.settings.seed;
  j["policy"] = {{"init", c.policy_init}, {"sigma", c.policy_sigma}};
  j["output"] = {{"name", c.output_name}};
  j["oracle"] = c.oracle;
  return j;
}

Environment load_environment(const EnvironmentConfig& c) {
  if (c.kind == "degradation") return build_degradation_mdp();
  if (c.kind == "discount-witness") return build_discount_witness_mdp();
  if (c.kind == "suite") {
    if (c.index < 0 || c.index >= 20) throw std::invalid_argument("suite index must be in [0, 20)");
    return seeupo_suite(c.seed == 0 ? kDefaultSuiteSeed : c.seed).at(c.index);
  }
  if (c.kind == "tree") {
    if (c.file) return tree_spec_from_json(read_json(*c.file));
    return generate_tree_bandit(c.seed, tree_shape_from_json(c.shape));
  }
  if (c.file) return mdp_spec_from_json(read_json(*c.file));
  return generate_finite_mdp(c.seed, mdp_shape_from_json(c.shape));
}

ExperimentReport run_experiment(const ExperimentConfig& c) {
  const Environment env = load_environment(c.environment);
  check_algorithm(c, env);
  RunSettings settings = c.settings;
  const std::uint64_t init_seed = derive_seed(c.settings.seed, "experiment.policy");
  if (const auto* tree = std::get_if<TreeBanditSpec>(&env)) {
    auto policy = make_tree_policy(*tree);
    if (c.policy_init == "random") randomize_logits(policy.table(), c.policy_sigma, init_seed);
    if (c.oracle) settings.j_star = backward_induction(*tree).j_star;
    if (c.algorithm == Algorithm::kSeeUpo) return run_seeupo(*tree, policy, settings, c.order);
    return run_algorithm(c.algorithm, *tree, policy, settings);
  }
  const auto& mdp = std::get<FiniteMdpSpec>(env);
  auto policy = c.policy_init == "reference" ? degradation_reference_policy(mdp) : make_mdp_policy(mdp);
  if (c.policy_init == "random") randomize_logits(policy.table(), c.policy_sigma, init_seed);
  if (c.oracle) settings.j_star = optimal_return(mdp, settings.update.discount);
  return run_algorithm(c.algorithm, mdp, policy, settings);
}

}  // namespace turnrl
