#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "turnrl/envs.hpp"
#include "turnrl/policy.hpp"

namespace turnrl {

// Nodes are (s0, a^{1:t}) for t in [0, T]; a HistoryKey whose prefix is the
// node's action sequence.
struct OptimalValueTree {
  std::map<HistoryKey, double> v_star;
  // Decision nodes only; actions achieving the max, ascending.
  std::map<HistoryKey, std::vector<int>> argmax_actions;
  std::vector<double> initial;  // V*(s0)
  double j_star = 0.0;

  // Follows the smallest maximizing action from the root of s0.
  std::vector<int> optimal_path(int s0) const;
};

OptimalValueTree backward_induction(const TreeBanditSpec& spec);

struct BruteForceResult {
  double j_star = 0.0;
  std::map<HistoryKey, int> policy;  // deterministic, one action per decision history
  std::size_t policies_checked = 0;
};

inline constexpr std::size_t kBruteForceCap = 1000000;

// Exhaustive search over deterministic history-conditioned policies. Policies
// for different initial states do not interact, so each initial state is
// searched separately; `cap` bounds the count per initial state.
BruteForceResult brute_force_optimal(const TreeBanditSpec& spec,
                                     std::size_t cap = kBruteForceCap);

// Number of deterministic history-conditioned policies for one initial state
// (saturates at SIZE_MAX).
std::size_t deterministic_policy_count(const TreeBanditSpec& spec, int s0);

// max over time-dependent Markov policies of the discounted return, by
// backward dynamic programming.
double optimal_return(const FiniteMdpSpec& spec, double discount);

enum class DriftKind { kPpu, kGraePpu, kGspo };
std::string_view to_string(DriftKind kind);

// E_{a~old}[ReLU((r - clip(r)) A)]
double ppu_drift(std::span<const double> old_probs, std::span<const double> candidate_probs,
                 std::span<const double> advantages, double eps);
// E_{a~old}[ReLU((r - clip(r)) (A + shift))] - shift
double grae_ppu_drift(std::span<const double> old_probs, std::span<const double> candidate_probs,
                      std::span<const double> advantages, double shift, double eps);
// E_{a~old}[r A - min(r A / std, clip(r) A / std)]; std must be positive.
double gspo_drift(std::span<const double> old_probs, std::span<const double> candidate_probs,
                  std::span<const double> advantages, double group_std, double eps);

// `parameter` is the shift for GRAE-PPU, the group std for GSPO, unused for PPU.
double evaluate_drift(DriftKind kind, std::span<const double> old_probs,
                      std::span<const double> candidate_probs, std::span<const double> advantages,
                      double parameter, double eps);

template <typename Key>
double ppu_drift(const TabularSoftmaxPolicy<Key>& old, const TabularSoftmaxPolicy<Key>& candidate,
                 const Key& key, std::span<const double> advantages, double eps) {
  return ppu_drift(old.action_probs(key), candidate.action_probs(key), advantages, eps);
}

inline constexpr double kFiniteDifferenceStep = 1e-5;

// Norm of the central-difference gradient in candidate probabilities at
// candidate = old, along the simplex tangent directions e_i - 1/n.
double drift_gradient_norm_at_origin(DriftKind kind, std::span<const double> old_probs,
                                     std::span<const double> advantages, double parameter,
                                     double eps, double h = kFiniteDifferenceStep);

struct DriftEvaluation {
  DriftKind kind = DriftKind::kPpu;
  double parameter = 0.0;
  double value = 0.0;
  double origin_value = 0.0;
  double origin_gradient_norm = 0.0;
};

DriftEvaluation evaluate_drift_at(DriftKind kind, std::span<const double> old_probs,
                                  std::span<const double> candidate_probs,
                                  std::span<const double> advantages, double parameter, double eps);

struct DriftWitness {
  std::vector<double> old_probs;
  std::vector<double> candidate_probs;
  std::vector<double> advantages;
  double value = 0.0;
  bool analytic = false;  // produced by the fallback construction
};

struct DriftPropertyReport {
  DriftKind kind = DriftKind::kPpu;
  double parameter = 0.0;
  double clip_epsilon = 0.2;
  std::uint64_t seed = 0;
  int draws = 0;
  int violations = 0;  // draws with negative drift
  double min_drift = 0.0;
  double max_abs_origin_value_error = 0.0;  // |D(old, old) - expected origin value|
  double max_origin_gradient_norm = 0.0;
  std::optional<DriftWitness> witness;  // most negative drift found
};

// Randomized search over (old, candidate, true advantages) triples. For GSPO
// a witness is constructed analytically if the search finds none.
DriftPropertyReport check_drift_properties(DriftKind kind, double parameter, int budget,
                                           std::uint64_t seed, double eps = 0.2);

struct GradientComparison {
  std::vector<double> grae_gradient;
  std::vector<double> true_gradient;
  double gap_norm = 0.0;
};

// Exact expected gradient of the total-reward group-relative estimator versus
// the exact gradient of the gamma-discounted return.
GradientComparison verify_grae_gradient(const FiniteMdpSpec& spec, const MdpPolicy& policy,
                                        double gamma);

// Three steps, gamma = 0.9. At t=0 in s0, action 0 pays 0 and moves to s1,
// which pays 1 on every later step; action 1 pays 0.5 and moves to s2, which
// pays nothing. Discounting shrinks the later rewards and so the preference
// for action 0, so the total-reward gradient differs from the discounted one.
FiniteMdpSpec build_discount_witness_mdp();

// Logits (ln 5, ln 2) at (s1, t=1) and zero elsewhere.
MdpPolicy degradation_reference_policy(const FiniteMdpSpec& spec);

struct DegradationReport {
  double clip_epsilon = 0.2;
  double learning_rate = 0.0;
  double v_start = 0.0;
  double v_branch = 0.0;
  double structural_bias = 0.0;          // V(s1) - V(s0)
  double true_advantage_good = 0.0;
  double true_advantage_bad = 0.0;
  double grae_advantage_good = 0.0;
  double grae_advantage_bad = 0.0;
  double prob_bad_before = 0.0;
  double prob_bad_after_grae = 0.0;
  double prob_bad_after_true = 0.0;
  double ratio_bad_grae = 1.0;
  double ratio_bad_true = 1.0;
  int epochs_grae = 0;
  int epochs_true = 0;
  double j_before = 0.0;
  double j_after_grae = 0.0;
  double j_after_true = 0.0;
  double drift_at_origin = 0.0;  // GRAE-PPU drift at s1 with the structural shift
};

// Runs the clipped update on the batch holding the trajectory that reaches
// s1 and picks a_bad, once with the group-relative advantage and once with
// the true advantages, each until the a_bad ratio leaves the clip band.
DegradationReport reproduce_degradation(double learning_rate = 1e-4, int max_epochs = 100000);

}  // namespace turnrl
