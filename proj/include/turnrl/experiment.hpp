#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "turnrl/envs.hpp"
#include "turnrl/io.hpp"
#include "turnrl/rollout.hpp"
#include "turnrl/seeupo.hpp"
#include "turnrl/updates.hpp"

namespace turnrl {

// Where the environment comes from. kinds: "tree" and "mdp" (from `file`, or
// generated from `seed` and `shape`), "suite" (instance `index` of the SeeUPO
// suite for `seed`), "degradation", "discount-witness".
struct EnvironmentConfig {
  std::string kind = "tree";
  std::optional<std::filesystem::path> file;
  std::uint64_t seed = 0;
  Json shape = Json::object();
  int index = 0;
};

struct ExperimentConfig {
  EnvironmentConfig environment;
  Algorithm algorithm = Algorithm::kSeeUpo;
  RunSettings settings;
  UpdateOrder order = UpdateOrder::kReverse;
  // "uniform", "random" (N(0, sigma^2) logits) or "reference" (degradation
  // environment only).
  std::string policy_init = "uniform";
  double policy_sigma = 1.0;
  std::filesystem::path output_dir = ".";
  std::string output_name = "run";
  bool oracle = true;  // compute J* for the gap column
};

using Environment = std::variant<TreeBanditSpec, FiniteMdpSpec>;

// Relative file paths resolve against `base_dir`. Throws on unknown fields,
// missing files and invalid algorithm/estimator combinations.
ExperimentConfig parse_experiment_config(const Json& j, const std::filesystem::path& base_dir = ".");
Json to_json(const ExperimentConfig& config);

TreeBanditShape tree_shape_from_json(const Json& j);
FiniteMdpShape mdp_shape_from_json(const Json& j);

Environment load_environment(const EnvironmentConfig& config);

// Runs the configured algorithm from the configured initial policy.
ExperimentReport run_experiment(const ExperimentConfig& config);

}  // namespace turnrl
