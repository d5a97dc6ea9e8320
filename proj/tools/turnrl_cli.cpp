#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "turnrl/experiment.hpp"
#include "turnrl/io.hpp"
#include "turnrl/theory.hpp"
#include "turnrl/verification.hpp"

using namespace turnrl;

namespace {

struct GenEnvArgs {
  std::string kind = "tree";
  std::uint64_t seed = 0;
  std::optional<int> turns;
  std::vector<int> actions_per_turn;
  std::optional<int> actions;
  std::optional<int> states;
  std::optional<int> horizon;
  double discount = 1.0;
  double termination = 0.0;
  std::string reward_timing = "every_step";
  std::string out;
  bool oracle = false;
};

int cmd_gen_env(const GenEnvArgs& a) {
  std::string text;
  // Keep stdout pure JSON when the spec itself goes there.
  std::ostream& info = a.out.empty() ? std::cerr : std::cout;
  if (a.kind == "tree") {
    TreeBanditShape shape;
    if (a.turns) shape.min_turns = shape.max_turns = *a.turns;
    if (a.actions) shape.min_actions = shape.max_actions = *a.actions;
    if (a.states) shape.min_states = shape.max_states = *a.states;
    shape.actions_per_turn = a.actions_per_turn;
    shape.termination_probability = a.termination;
    const auto spec = generate_tree_bandit(a.seed, shape);
    text = to_json(spec).dump(2) + "\n";
    std::size_t episodes = 0;
    for (int s0 = 0; s0 < spec.num_initial_states; ++s0) episodes += enumerate_episodes(spec, s0).size();
    info << "paths per initial state: " << spec.paths_per_state() << "\n";
    info << "episodes: " << episodes << "\n";
    if (a.oracle) info << "J*: " << format_double(backward_induction(spec).j_star) << "\n";
  } else if (a.kind == "mdp") {
    FiniteMdpShape shape;
    if (a.states) shape.min_states = shape.max_states = *a.states;
    if (a.actions) shape.min_actions = shape.max_actions = *a.actions;
    if (a.horizon) shape.min_horizon = shape.max_horizon = *a.horizon;
    shape.discount = a.discount;
    shape.reward_timing =
        a.reward_timing == "final_step" ? RewardTiming::kFinalStep : RewardTiming::kEveryStep;
    const auto spec = generate_finite_mdp(a.seed, shape);
    text = to_json(spec).dump(2) + "\n";
    info << "trajectories: " << mdp_trajectory_count(spec) << "\n";
    if (a.oracle) info << "J*: " << format_double(optimal_return(spec, spec.discount)) << "\n";
  } else if (a.kind == "degradation" || a.kind == "discount-witness") {
    const auto spec = a.kind == "degradation" ? build_degradation_mdp() : build_discount_witness_mdp();
    text = to_json(spec).dump(2) + "\n";
    if (a.oracle) info << "J*: " << format_double(optimal_return(spec, spec.discount)) << "\n";
  } else {
    throw std::invalid_argument("unknown kind: " + a.kind);
  }
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(output_directory(".") / a.out, text);
    std::cout << "wrote " << (output_directory(".") / a.out).string() << "\n";
  }
  return 0;
}

int cmd_run(const std::string& config_path, const std::optional<std::string>& out_dir, bool timing) {
  const std::filesystem::path path(config_path);
  auto config = parse_experiment_config(read_json(path), path.parent_path().empty() ? "." : path.parent_path());
  if (out_dir) config.output_dir = *out_dir;
  const auto dir = output_directory(config.output_dir);

  std::vector<double> wall{0.0};
  const auto t0 = std::chrono::steady_clock::now();
  config.settings.on_iteration = [&](int, const SoftmaxTable&) {
    wall.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  };
  const auto report = run_experiment(config);
  const auto csv = report_csv(report, timing ? &wall : nullptr);
  const auto json = report_json(report, to_json(config)).dump(2) + "\n";
  write_file_atomic(dir / (config.output_name + ".csv"), csv);
  write_file_atomic(dir / (config.output_name + ".json"), json);
  const auto& last = report.rows.back();
  std::cout << report.algorithm << ": J " << format_double(report.rows.front().j_exact) << " -> "
            << format_double(last.j_exact);
  if (last.gap_to_optimal) std::cout << " (gap " << format_double(*last.gap_to_optimal) << ")";
  std::cout << "\nwrote " << (dir / (config.output_name + ".csv")).string() << " and "
            << (dir / (config.output_name + ".json")).string() << "\n";
  return 0;
}

int cmd_verify(std::vector<std::string> names, bool all, const VerifyOptions& options,
               const std::string& out) {
  if (all || names.empty()) names = verification_checks();
  std::vector<CheckResult> results;
  for (const auto& name : names) {
    const auto t0 = std::chrono::steady_clock::now();
    results.push_back(run_check(name, options));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "%-24s %s  (%.2f s)\n", name.c_str(), results.back().passed ? "PASS" : "FAIL", secs);
  }
  const auto card = scorecard(results, options);
  const std::string text = card.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(output_directory(".") / out, text);
  }
  return card["passed"].get<bool>() ? 0 : 1;
}

int cmd_oracle(const std::string& spec_path, bool brute_force) {
  const auto j = read_json(spec_path);
  if (j.value("kind", std::string("tree")) == "mdp") {
    const auto spec = mdp_spec_from_json(j);
    std::cout << "J*: " << format_double(optimal_return(spec, spec.discount)) << "\n";
    return 0;
  }
  const auto spec = tree_spec_from_json(j);
  const auto tree = backward_induction(spec);
  std::cout << "J*: " << format_double(tree.j_star) << "\n";
  for (int s0 = 0; s0 < spec.num_initial_states; ++s0) {
    std::cout << "s0=" << s0 << " V*=" << format_double(tree.initial[s0]) << " path=";
    for (int a : tree.optimal_path(s0)) std::cout << a << ' ';
    std::cout << "\n";
  }
  if (brute_force) {
    const auto bf = brute_force_optimal(spec);
    std::cout << "brute force J*: " << format_double(bf.j_star) << " ("
              << bf.policies_checked << " policies)\n";
    if (bf.j_star != tree.j_star) {
      std::cerr << "oracles disagree\n";
      return 1;
    }
  }
  return 0;
}

int cmd_order_compare(const VerifyOptions& options, const std::string& out) {
  std::vector<SuiteRun> runs;
  for (UpdateOrder order : {UpdateOrder::kReverse, UpdateOrder::kNatural, UpdateOrder::kRandom}) {
    auto r = run_seeupo_suite(order, seeupo_suite_config(), options);
    runs.insert(runs.end(), r.begin(), r.end());
  }
  const auto csv = order_table_csv(runs);
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_file_atomic(output_directory(".") / out, csv);
  }
  struct Summary {
    double total_j = 0.0;
    double worst_gap = 0.0;
    int count = 0;
  };
  std::map<std::string, Summary> summary;
  for (const auto& r : runs) {
    auto& s = summary[r.order];
    s.total_j += r.final_j;
    s.worst_gap = std::max(s.worst_gap, r.j_star - r.final_j);
    ++s.count;
  }
  for (const auto& [order, s] : summary)
    std::fprintf(stderr, "%-8s mean final J %.6f  worst gap %.3e\n", order.c_str(), s.total_j / s.count,
                 s.worst_gap);
  return 0;
}

int cmd_norm_compare(const VerifyOptions& options, const std::string& out) {
  const auto csv = normalization_table_csv(compare_normalizations(options));
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_file_atomic(output_directory(".") / out, csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular policy-gradient laboratory: tree bandits, finite MDPs, SeeUPO"};
  app.require_subcommand(1);

  GenEnvArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-env", "Generate an environment spec as JSON");
  gen_cmd->add_option("--kind", gen.kind, "tree | mdp | degradation | discount-witness");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--turns", gen.turns, "Tree: number of turns T");
  gen_cmd->add_option("--actions-per-turn", gen.actions_per_turn, "Tree: action count per turn")->delimiter(',');
  gen_cmd->add_option("--actions", gen.actions, "Action count (every turn, or per MDP state)");
  gen_cmd->add_option("--states", gen.states, "Initial states (tree) or states (mdp)");
  gen_cmd->add_option("--horizon", gen.horizon, "MDP horizon");
  gen_cmd->add_option("--discount", gen.discount, "MDP discount");
  gen_cmd->add_option("--termination", gen.termination, "Tree: early-termination probability");
  gen_cmd->add_option("--reward-timing", gen.reward_timing, "MDP: every_step | final_step");
  gen_cmd->add_option("--out", gen.out, "Output file (stdout when omitted)");
  gen_cmd->add_flag("--oracle", gen.oracle, "Print the optimal return J*");

  std::string config_path;
  std::optional<std::string> run_out;
  bool timing = false;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment config; writes CSV and JSON reports");
  run_cmd->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out-dir", run_out, "Output directory (overrides the config)");
  run_cmd->add_flag("--timing", timing, "Add a wall-clock column (breaks byte-identical reruns)");

  VerifyOptions options;
  std::vector<std::string> checks;
  bool all = false;
  std::string verify_out;
  auto* verify_cmd = app.add_subcommand("verify", "Run verification checks; exit 0 iff all pass");
  verify_cmd->add_option("checks", checks, "Check ids (default: all)")
      ->check(CLI::IsMember(verification_checks()));
  verify_cmd->add_flag("--all", all, "Run every check");
  verify_cmd->add_option("--seed", options.seed, "Suite seed");
  verify_cmd->add_option("--threads", options.threads, "Worker threads")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--iterations", options.seeupo_iterations, "SeeUPO iterations per run");
  verify_cmd->add_option("--drift-budget", options.drift_budget, "Random draws per drift search");
  verify_cmd->add_option("--out", verify_out, "Scorecard file (stdout when omitted)");

  std::string oracle_spec;
  bool brute = false;
  auto* oracle_cmd = app.add_subcommand("oracle", "Optimal return of a spec by backward induction");
  oracle_cmd->add_option("spec", oracle_spec, "Spec file (JSON)")->required()->check(CLI::ExistingFile);
  oracle_cmd->add_flag("--brute-force", brute, "Cross-check by exhaustive policy enumeration");

  std::string compare_out;
  auto* order_cmd = app.add_subcommand("order-compare", "Final exact J per update order on the SeeUPO suite");
  auto* norm_cmd = app.add_subcommand("norm-compare", "Final exact J per advantage normalization on the SeeUPO suite");
  for (auto* cmd : {order_cmd, norm_cmd}) {
    cmd->add_option("--seed", options.seed, "Suite seed");
    cmd->add_option("--threads", options.threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--iterations", options.seeupo_iterations, "SeeUPO iterations per run");
    cmd->add_option("--out", compare_out, "CSV file (stdout when omitted)");
  }

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen_cmd) return cmd_gen_env(gen);
    if (*run_cmd) return cmd_run(config_path, run_out, timing);
    if (*verify_cmd) return cmd_verify(checks, all, options, verify_out);
    if (*oracle_cmd) return cmd_oracle(oracle_spec, brute);
    if (*order_cmd) return cmd_order_compare(options, compare_out);
    if (*norm_cmd) return cmd_norm_compare(options, compare_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
