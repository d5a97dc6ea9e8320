#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "turnrl/advantage.hpp"
#include "turnrl/envs.hpp"
#include "turnrl/policy.hpp"
#include "turnrl/rollout.hpp"

namespace turnrl {

struct PolicyStep {
  int context = 0;
  int action = 0;
};

// The unit an importance ratio is formed over: a single step for token-level
// updates, all real turns of a trajectory for sequence-level updates. A unit
// with no steps (a masked placeholder) has ratio 1 and no gradient.
struct RatioUnit {
  double weight = 0.0;
  double advantage = 0.0;
  std::vector<PolicyStep> steps;
};

struct UpdateConfig {
  double learning_rate = 0.1;
  double clip_epsilon = 0.2;
  int epochs_per_batch = 4;
  double kl_penalty_coefficient = 0.0;
  double discount = 1.0;
  double gae_lambda = 0.95;
  Normalization normalization = Normalization::kNone;
  Estimator estimator = Estimator::kGrae;
  bool adaptive = false;  // Adam steps instead of plain gradient ascent
};

void validate(const UpdateConfig& config);

// pi_candidate(steps) / pi_old(steps) from per-entry log-probabilities laid
// out like SoftmaxTable::flat().
double unit_ratio(const RatioUnit& unit, std::span<const double> candidate_log_probs,
                  std::span<const double> old_log_probs, const SoftmaxTable& layout);
std::vector<double> all_log_probs(const SoftmaxTable& table);

// min(r A, clip(r, 1 - eps, 1 + eps) A)
double clipped_term(double ratio, double advantage, double eps);
// True where the clipped branch is active and the gradient vanishes.
bool clip_active(double ratio, double advantage, double eps);

// sum_u w_u A_u sum_steps grad log pi(a | ctx)
std::vector<double> reinforce_gradient(const SoftmaxTable& policy,
                                       std::span<const RatioUnit> units);
double ppu_objective(std::span<const RatioUnit> units, const SoftmaxTable& candidate,
                     const SoftmaxTable& old, double eps);

struct PpuGradient {
  std::vector<double> gradient;
  double clip_fraction = 0.0;  // weight share of clipped units among units with steps
};

PpuGradient ppu_gradient(std::span<const RatioUnit> units, const SoftmaxTable& candidate,
                         const SoftmaxTable& old, double eps);

// Gradient of -beta * sum_u w_u sum_steps (log pi_old - log pi_candidate).
std::vector<double> kl_penalty_gradient(std::span<const RatioUnit> units,
                                        const SoftmaxTable& candidate, double beta);

double norm2(std::span<const double> v);

// Plain ascent, or Adam when configured.
class Optimizer {
 public:
  explicit Optimizer(const UpdateConfig& config) : config_(config) {}
  void step(SoftmaxTable& table, std::span<const double> gradient);

 private:
  UpdateConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  long steps_ = 0;
};

struct PpuUpdateStats {
  double grad_norm = 0.0;      // at the start of the update (candidate = old)
  double clip_fraction = 0.0;  // after the last epoch
};

// epochs_per_batch ascent steps on the clipped surrogate, ratios against `old`.
PpuUpdateStats ppu_ascent(std::span<const RatioUnit> units, SoftmaxTable& policy,
                          const SoftmaxTable& old, const UpdateConfig& config,
                          Optimizer& optimizer);

// Joint group-relative advantage per trajectory, normalized per config.
std::vector<AdvantageRecord> joint_advantages(const std::vector<Group>& groups,
                                              const UpdateConfig& config);

// Sequence-level units over all real turns of each trajectory, in batch order.
std::vector<RatioUnit> sequence_units(const std::vector<Group>& groups,
                                      const std::vector<AdvantageRecord>& advantages,
                                      const TreePolicy& policy);

enum class Algorithm { kGaePpu, kGraeReinforce, kGraePpuToken, kGraePpuSeq, kSeeUpo };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

struct IterationRow {
  int iteration = 0;
  double j_exact = 0.0;
  std::optional<double> gap_to_optimal;
  double grad_norm = 0.0;
  double clip_fraction = 0.0;
  double advantage_mean = 0.0;
  double advantage_std = 0.0;
  // Sequential-update extras.
  std::string order;
  std::vector<int> turn_order;
  std::vector<double> turn_clip_fraction;
  std::vector<double> turn_mean_abs_m;
};

struct ExperimentReport {
  std::string algorithm;
  std::vector<IterationRow> rows;
  std::optional<double> j_star;
  // Advantage records of the final iteration, when the estimator yields them.
  std::vector<AdvantageRecord> final_advantages;
};

struct RunSettings {
  UpdateConfig update;
  int iterations = 1;
  std::uint64_t seed = 0;
  Mode mode = Mode::kExact;
  int batch_size = 1;
  int group_size = 4;
  std::optional<double> j_star;
  // Called with the iteration index and the policy table after each update.
  std::function<void(int, const SoftmaxTable&)> on_iteration;
};

// Weighted mean and population std of normalized advantages.
void fill_advantage_stats(IterationRow& row, const std::vector<RatioUnit>& units);

// Token-level names run on MDPs; on a tree bandit they run on its token view.
// GRAE-PPU-seq needs a tree bandit. SeeUPO is run by run_seeupo.
ExperimentReport run_algorithm(Algorithm algorithm, const FiniteMdpSpec& spec,
                               MdpPolicy& policy, const RunSettings& settings);
ExperimentReport run_algorithm(Algorithm algorithm, const TreeBanditSpec& spec,
                               TreePolicy& policy, const RunSettings& settings);

}  // namespace turnrl
