#include "turnrl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "turnrl/advantage.hpp"
#include "turnrl/random.hpp"
#include "turnrl/updates.hpp"

namespace turnrl {

namespace {

std::vector<int> padded(const TreeBanditSpec& spec, std::vector<int> prefix) {
  prefix.resize(spec.horizon, kNoOp);
  return prefix;
}

bool is_leaf(const TreeBanditSpec& spec, int s0, const std::vector<int>& prefix) {
  return static_cast<int>(prefix.size()) == spec.horizon || spec.ends_after(s0, prefix);
}

double solve(const TreeBanditSpec& spec, int s0, std::vector<int>& prefix, OptimalValueTree& out) {
  double value;
  if (is_leaf(spec, s0, prefix)) {
    value = spec.reward(s0, padded(spec, prefix));
  } else {
    const int n = spec.actions_per_turn[prefix.size()];
    std::vector<double> child(n);
    for (int a = 0; a < n; ++a) {
      prefix.push_back(a);
      child[a] = solve(spec, s0, prefix, out);
      prefix.pop_back();
    }
    value = *std::max_element(child.begin(), child.end());
    std::vector<int> best;
    for (int a = 0; a < n; ++a) {
      if (child[a] == value) best.push_back(a);
    }
    out.argmax_actions.emplace(HistoryKey{s0, prefix}, std::move(best));
  }
  out.v_star.emplace(HistoryKey{s0, prefix}, value);
  return value;
}

void check_probs(std::span<const double> old_probs, std::span<const double> candidate_probs,
                 std::span<const double> advantages) {
  if (old_probs.empty() || old_probs.size() != candidate_probs.size() ||
      old_probs.size() != advantages.size())
    throw std::invalid_argument("drift: mismatched or empty vectors");
  for (std::size_t i = 0; i < old_probs.size(); ++i) {
    if (!(old_probs[i] > 0.0)) throw std::invalid_argument("drift: old probabilities must be positive");
  }
}

double clip(double r, double eps) { return std::clamp(r, 1.0 - eps, 1.0 + eps); }

double expected_origin_value(DriftKind kind, double parameter) {
  return kind == DriftKind::kGraePpu ? -parameter : 0.0;
}

std::vector<double> random_probs(Rng& rng, int n) {
  std::vector<double> p(n);
  double sum = 0.0;
  for (double& x : p) sum += (x = 0.02 + rng.uniform());
  for (double& x : p) x /= sum;
  return p;
}

std::vector<double> nearby_probs(Rng& rng, std::span<const double> old) {
  const double sigma = rng.uniform(0.001, 0.5);
  std::vector<double> logits(old.size());
  for (std::size_t i = 0; i < old.size(); ++i) logits[i] = std::log(old[i]) + rng.normal(0.0, sigma);
  softmax_inplace(logits);
  return logits;
}

// Two actions, pi_old = (1/2, 1/2), A = (+1, -1). Inside the clip band the
// integrand is (1 - 1/std) r A, negative in expectation when mass moves toward
// the negative action for std > 1 and toward the positive one for std < 1.
std::optional<DriftWitness> analytic_gspo_witness(double group_std, double eps) {
  if (group_std == 1.0) return std::nullopt;
  const double shift = group_std > 1.0 ? -eps / 2.0 : eps / 2.0;
  DriftWitness w;
  w.old_probs = {0.5, 0.5};
  w.candidate_probs = {0.5 * (1.0 + shift), 0.5 * (1.0 - shift)};
  w.advantages = {1.0, -1.0};
  w.value = gspo_drift(w.old_probs, w.candidate_probs, w.advantages, group_std, eps);
  w.analytic = true;
  if (!(w.value < 0.0)) return std::nullopt;
  return w;
}

}  // namespace

std::vector<int> OptimalValueTree::optimal_path(int s0) const {
  std::vector<int> prefix;
  for (auto it = argmax_actions.find({s0, prefix}); it != argmax_actions.end();
       it = argmax_actions.find({s0, prefix})) {
    prefix.push_back(it->second.front());
  }
  return prefix;
}

OptimalValueTree backward_induction(const TreeBanditSpec& spec) {
  validate(spec);
  OptimalValueTree out;
  out.initial.resize(spec.num_initial_states);
  for (int s0 = 0; s0 < spec.num_initial_states; ++s0) {
    std::vector<int> prefix;
    out.initial[s0] = solve(spec, s0, prefix, out);
  }
  for (int s0 = 0; s0 < spec.num_initial_states; ++s0)
    out.j_star += spec.initial_distribution[s0] * out.initial[s0];
  return out;
}

std::size_t deterministic_policy_count(const TreeBanditSpec& spec, int s0) {
  constexpr std::size_t kMax = std::numeric_limits<std::size_t>::max();
  std::size_t count = 1;
  for (const auto& key : decision_histories(spec)) {
    if (key.s0 != s0) continue;
    const auto n = static_cast<std::size_t>(spec.actions_per_turn[key.prefix.size()]);
    count = count > kMax / n ? kMax : count * n;
  }
  return count;
}

BruteForceResult brute_force_optimal(const TreeBanditSpec& spec, std::size_t cap) {
  validate(spec);
  BruteForceResult result;
  const auto histories = decision_histories(spec);
  for (int s0 = 0; s0 < spec.num_initial_states; ++s0) {
    if (deterministic_policy_count(spec, s0) > cap)
      throw std::length_error("brute_force_optimal: too many deterministic policies");
    std::vector<HistoryKey> keys;
    std::map<std::vector<int>, int> index;
    for (const auto& key : histories) {
      if (key.s0 != s0) continue;
      index.emplace(key.prefix, static_cast<int>(keys.size()));
      keys.push_back(key);
    }
    // next[i][a] >= 0 is a child context; otherwise the leaf reward is in leaf[i][a].
    const int n = static_cast<int>(keys.size());
    std::vector<std::vector<int>> next(n);
    std::vector<std::vector<double>> leaf(n);
    for (int i = 0; i < n; ++i) {
      const int actions = spec.actions_per_turn[keys[i].prefix.size()];
      next[i].assign(actions, -1);
      leaf[i].assign(actions, 0.0);
      for (int a = 0; a < actions; ++a) {
        auto child = keys[i].prefix;
        child.push_back(a);
        if (is_leaf(spec, s0, child)) {
          leaf[i][a] = spec.reward(s0, padded(spec, child));
        } else {
          next[i][a] = index.at(child);
        }
      }
    }
    std::vector<int> choice(n, 0), best_choice(n, 0);
    double best = -std::numeric_limits<double>::infinity();
    while (true) {
      int ctx = 0;
      while (next[ctx][choice[ctx]] >= 0) ctx = next[ctx][choice[ctx]];
      const double value = leaf[ctx][choice[ctx]];
      ++result.policies_checked;
      if (value > best) {
        best = value;
        best_choice = choice;
      }
      int pos = n - 1;
      while (pos >= 0 && ++choice[pos] == static_cast<int>(next[pos].size())) choice[pos--] = 0;
      if (pos < 0) break;
    }
    for (int i = 0; i < n; ++i) result.policy.emplace(keys[i], best_choice[i]);
    result.j_star += spec.initial_distribution[s0] * best;
  }
  return result;
}

double optimal_return(const FiniteMdpSpec& spec, double discount) {
  validate(spec);
  std::vector<double> next(spec.num_states, 0.0);
  for (int t = spec.horizon - 1; t >= 0; --t) {
    std::vector<double> cur(spec.num_states);
    for (int s = 0; s < spec.num_states; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < spec.num_actions; ++a) {
        double q = spec.step_reward(s, a, t);
        for (int s2 = 0; s2 < spec.num_states; ++s2) q += discount * spec.transition[s][a][s2] * next[s2];
        best = std::max(best, q);
      }
      cur[s] = best;
    }
    next = std::move(cur);
  }
  double j = 0.0;
  for (int s = 0; s < spec.num_states; ++s) j += spec.initial_distribution[s] * next[s];
  return j;
}

std::string_view to_string(DriftKind kind) {
  switch (kind) {
    case DriftKind::kPpu: return "PPU";
    case DriftKind::kGraePpu: return "GRAE-PPU";
    case DriftKind::kGspo: return "GSPO";
  }
  return "?";
}

double ppu_drift(std::span<const double> old_probs, std::span<const double> candidate_probs,
                 std::span<const double> advantages, double eps) {
  check_probs(old_probs, candidate_probs, advantages);
  double total = 0.0;
  for (std::size_t i = 0; i < old_probs.size(); ++i) {
    const double r = candidate_probs[i] / old_probs[i];
    total += old_probs[i] * std::max(0.0, (r - clip(r, eps)) * advantages[i]);
  }
  return total;
}

double grae_ppu_drift(std::span<const double> old_probs, std::span<const double> candidate_probs,
                      std::span<const double> advantages, double shift, double eps) {
  check_probs(old_probs, candidate_probs, advantages);
  double total = 0.0;
  for (std::size_t i = 0; i < old_probs.size(); ++i) {
    const double r = candidate_probs[i] / old_probs[i];
    total += old_probs[i] * std::max(0.0, (r - clip(r, eps)) * (advantages[i] + shift));
  }
  return total - shift;
}

double gspo_drift(std::span<const double> old_probs, std::span<const double> candidate_probs,
                  std::span<const double> advantages, double group_std, double eps) {
  check_probs(old_probs, candidate_probs, advantages);
  if (!(group_std > 0.0)) throw std::invalid_argument("gspo_drift: group std must be positive");
  double total = 0.0;
  for (std::size_t i = 0; i < old_probs.size(); ++i) {
    const double r = candidate_probs[i] / old_probs[i];
    const double a = advantages[i];
    total += old_probs[i] * (r * a - std::min(r * a / group_std, clip(r, eps) * a / group_std));
  }
  return total;
}

double evaluate_drift(DriftKind kind, std::span<const double> old_probs,
                      std::span<const double> candidate_probs, std::span<const double> advantages,
                      double parameter, double eps) {
  switch (kind) {
    case DriftKind::kPpu: return ppu_drift(old_probs, candidate_probs, advantages, eps);
    case DriftKind::kGraePpu:
      return grae_ppu_drift(old_probs, candidate_probs, advantages, parameter, eps);
    case DriftKind::kGspo: return gspo_drift(old_probs, candidate_probs, advantages, parameter, eps);
  }
  throw std::invalid_argument("evaluate_drift: unknown kind");
}

double drift_gradient_norm_at_origin(DriftKind kind, std::span<const double> old_probs,
                                     std::span<const double> advantages, double parameter,
                                     double eps, double h) {
  const std::size_t n = old_probs.size();
  std::vector<double> plus(n), minus(n);
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dir = (i == j ? 1.0 : 0.0) - 1.0 / static_cast<double>(n);
      plus[j] = old_probs[j] + h * dir;
      minus[j] = old_probs[j] - h * dir;
    }
    const double g = (evaluate_drift(kind, old_probs, plus, advantages, parameter, eps) -
                      evaluate_drift(kind, old_probs, minus, advantages, parameter, eps)) /
                     (2.0 * h);
    sq += g * g;
  }
  return std::sqrt(sq);
}

DriftEvaluation evaluate_drift_at(DriftKind kind, std::span<const double> old_probs,
                                  std::span<const double> candidate_probs,
                                  std::span<const double> advantages, double parameter,
                                  double eps) {
  DriftEvaluation e;
  e.kind = kind;
  e.parameter = parameter;
  e.value = evaluate_drift(kind, old_probs, candidate_probs, advantages, parameter, eps);
  e.origin_value = evaluate_drift(kind, old_probs, old_probs, advantages, parameter, eps);
  e.origin_gradient_norm =
      drift_gradient_norm_at_origin(kind, old_probs, advantages, parameter, eps);
  return e;
}

DriftPropertyReport check_drift_properties(DriftKind kind, double parameter, int budget,
                                           std::uint64_t seed, double eps) {
  if (budget <= 0) throw std::invalid_argument("check_drift_properties: budget must be positive");
  if (kind == DriftKind::kGspo && !(parameter > 0.0))
    throw std::invalid_argument("check_drift_properties: group std must be positive");
  DriftPropertyReport report;
  report.kind = kind;
  report.parameter = parameter;
  report.clip_epsilon = eps;
  report.seed = seed;
  report.min_drift = std::numeric_limits<double>::infinity();
  Rng rng(derive_seed(seed, "drift.search", static_cast<std::uint64_t>(kind)));
  const double origin_expected = expected_origin_value(kind, parameter);

  auto consider = [&](std::vector<double> old, std::vector<double> cand, std::vector<double> adv,
                      double value) {
    ++report.draws;
    if (value < 0.0) ++report.violations;
    if (value < report.min_drift) {
      report.min_drift = value;
      if (value < 0.0) report.witness = DriftWitness{std::move(old), std::move(cand), std::move(adv), value, false};
    }
  };

  for (int draw = 0; draw < budget; ++draw) {
    const int n = rng.uniform_int(2, 5);
    auto old = random_probs(rng, n);
    std::vector<double> adv(n);
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += old[i] * (adv[i] = rng.uniform(-1.0, 1.0));
    for (double& a : adv) a -= mean;
    auto cand = rng.uniform() < 0.5 ? nearby_probs(rng, old) : random_probs(rng, n);

    const double origin = evaluate_drift(kind, old, old, adv, parameter, eps);
    report.max_abs_origin_value_error =
        std::max(report.max_abs_origin_value_error, std::abs(origin - origin_expected));
    report.max_origin_gradient_norm =
        std::max(report.max_origin_gradient_norm,
                 drift_gradient_norm_at_origin(kind, old, adv, parameter, eps));
    consider(old, old, adv, origin);
    const double value = evaluate_drift(kind, old, cand, adv, parameter, eps);
    consider(std::move(old), std::move(cand), std::move(adv), value);
  }
  if (kind == DriftKind::kGspo && !report.witness) {
    if (auto w = analytic_gspo_witness(parameter, eps)) {
      report.min_drift = std::min(report.min_drift, w->value);
      report.witness = std::move(w);
    }
  }
  return report;
}

GradientComparison verify_grae_gradient(const FiniteMdpSpec& spec, const MdpPolicy& policy,
                                        double gamma) {
  validate(spec);
  const auto grae = expected_grae(spec, policy);
  const auto occupancy = state_occupancy(spec, policy);
  const auto values = exact_values(spec, policy, gamma);
  const auto& table = policy.table();
  GradientComparison out;
  out.grae_gradient.assign(table.size(), 0.0);
  out.true_gradient.assign(table.size(), 0.0);
  const auto probs = table.all_probs();
  double discount = 1.0;
  for (int t = 0; t < spec.horizon; ++t, discount *= gamma) {
    for (int s = 0; s < spec.num_states; ++s) {
      const double occ = occupancy[t][s];
      if (occ == 0.0) continue;
      const int ctx = policy.context({s, t});
      const auto pi = table.probs(ctx);
      for (int a = 0; a < spec.num_actions; ++a) {
        const double mass = occ * pi[a];
        table.add_score(ctx, a, mass * grae.advantage[t][s][a], probs, out.grae_gradient);
        table.add_score(ctx, a, mass * discount * values.advantage(s, a, t), probs,
                        out.true_gradient);
      }
    }
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const double d = out.grae_gradient[i] - out.true_gradient[i];
    sq += d * d;
  }
  out.gap_norm = std::sqrt(sq);
  return out;
}

FiniteMdpSpec build_discount_witness_mdp() {
  FiniteMdpSpec spec;
  spec.num_states = 3;
  spec.num_actions = 2;
  spec.horizon = 3;
  spec.discount = 0.9;
  spec.reward_timing = RewardTiming::kEveryStep;
  spec.initial_distribution = {1.0, 0.0, 0.0};
  spec.transition.assign(3, std::vector<std::vector<double>>(2, std::vector<double>(3, 0.0)));
  spec.reward.assign(3, std::vector<double>(2, 0.0));
  spec.transition[0][0][1] = 1.0;
  spec.transition[0][1][2] = 1.0;
  spec.reward[0][1] = 0.5;
  for (int a = 0; a < 2; ++a) {
    spec.transition[1][a][1] = 1.0;
    spec.transition[2][a][2] = 1.0;
    spec.reward[1][a] = 1.0;
  }
  validate(spec);
  return spec;
}

MdpPolicy degradation_reference_policy(const FiniteMdpSpec& spec) {
  auto policy = make_mdp_policy(spec);
  const double logits[2] = {std::log(5.0), std::log(2.0)};
  policy.set_logits({degradation::kBranch, 1}, logits);
  return policy;
}

DegradationReport reproduce_degradation(double learning_rate, int max_epochs) {
  using namespace degradation;
  const auto spec = build_degradation_mdp();
  const auto reference = degradation_reference_policy(spec);
  const auto values = exact_values(spec, reference, 1.0);

  DegradationReport rep;
  rep.learning_rate = learning_rate;
  rep.v_start = values.v[0][kStart];
  rep.v_branch = values.v[1][kBranch];
  rep.structural_bias = rep.v_branch - rep.v_start;
  rep.true_advantage_good = values.advantage(kBranch, kGood, 1);
  rep.true_advantage_bad = values.advantage(kBranch, kBad, 1);
  // Baseline is V(s0) of the start state; the reward is paid on the last step.
  rep.grae_advantage_good = spec.step_reward(kBranch, kGood, 1) - rep.v_start;
  rep.grae_advantage_bad = spec.step_reward(kBranch, kBad, 1) - rep.v_start;
  rep.j_before = exact_return(spec, reference, 1.0);

  const int start_ctx = reference.context({kStart, 0});
  const int branch_ctx = reference.context({kBranch, 1});
  rep.prob_bad_before = reference.table().prob(branch_ctx, kBad);
  {
    const auto pi = reference.action_probs({kBranch, 1});
    const double adv[2] = {rep.true_advantage_good, rep.true_advantage_bad};
    rep.drift_at_origin = grae_ppu_drift(pi, pi, adv, rep.structural_bias, rep.clip_epsilon);
  }

  // The single trajectory s0 -a_good-> s1 -a_bad->.
  auto run = [&](double start_advantage, double branch_advantage, int& epochs, double& ratio,
                 double& prob_after, double& j_after) {
    const std::vector<RatioUnit> units = {
        {1.0, start_advantage, {{start_ctx, kGood}}},
        {1.0, branch_advantage, {{branch_ctx, kBad}}},
    };
    auto policy = reference;
    const SoftmaxTable old = reference.table();
    const double old_log = old.log_prob(branch_ctx, kBad);
    epochs = 0;
    ratio = 1.0;
    while (epochs < max_epochs && !clip_active(ratio, branch_advantage, rep.clip_epsilon)) {
      const auto grad = ppu_gradient(units, policy.table(), old, rep.clip_epsilon);
      policy.table().ascend(grad.gradient, learning_rate);
      ++epochs;
      ratio = std::exp(policy.table().log_prob(branch_ctx, kBad) - old_log);
    }
    prob_after = policy.table().prob(branch_ctx, kBad);
    j_after = exact_return(spec, policy, 1.0);
  };
  run(rep.grae_advantage_bad, rep.grae_advantage_bad, rep.epochs_grae, rep.ratio_bad_grae,
      rep.prob_bad_after_grae, rep.j_after_grae);
  run(values.advantage(kStart, kGood, 0), rep.true_advantage_bad, rep.epochs_true,
      rep.ratio_bad_true, rep.prob_bad_after_true, rep.j_after_true);
  return rep;
}

}  // namespace turnrl
