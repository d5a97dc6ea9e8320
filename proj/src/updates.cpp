#include "turnrl/updates.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "turnrl/random.hpp"

namespace turnrl {

void validate(const UpdateConfig& config) {
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("update config: learning_rate must be > 0");
  if (!(config.clip_epsilon > 0.0)) throw std::invalid_argument("update config: clip_epsilon must be > 0");
  if (config.epochs_per_batch < 1) throw std::invalid_argument("update config: epochs_per_batch must be >= 1");
  if (config.kl_penalty_coefficient < 0.0)
    throw std::invalid_argument("update config: kl_penalty_coefficient must be >= 0");
  if (config.discount < 0.0 || config.discount > 1.0)
    throw std::invalid_argument("update config: discount outside [0, 1]");
  if (config.gae_lambda < 0.0 || config.gae_lambda > 1.0)
    throw std::invalid_argument("update config: gae_lambda outside [0, 1]");
}

std::vector<double> all_log_probs(const SoftmaxTable& table) {
  std::vector<double> out = table.flat();
  for (int c = 0; c < table.num_contexts(); ++c) {
    auto block = std::span<double>(out.data() + table.offset(c), table.num_actions(c));
    const double peak = *std::max_element(block.begin(), block.end());
    double total = 0.0;
    for (double v : block) total += std::exp(v - peak);
    const double lse = peak + std::log(total);
    for (double& v : block) v -= lse;
  }
  return out;
}

double unit_ratio(const RatioUnit& unit, std::span<const double> candidate_log_probs,
                  std::span<const double> old_log_probs, const SoftmaxTable& layout) {
  double log_ratio = 0.0;
  for (const auto& step : unit.steps) {
    const std::size_t i = layout.offset(step.context) + step.action;
    log_ratio += candidate_log_probs[i] - old_log_probs[i];
  }
  return std::exp(log_ratio);
}

double clipped_term(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

bool clip_active(double ratio, double advantage, double eps) {
  return (advantage > 0.0 && ratio > 1.0 + eps) || (advantage < 0.0 && ratio < 1.0 - eps);
}

std::vector<double> reinforce_gradient(const SoftmaxTable& policy,
                                       std::span<const RatioUnit> units) {
  std::vector<double> grad(policy.size(), 0.0);
  const auto probs = policy.all_probs();
  for (const auto& u : units) {
    const double scale = u.weight * u.advantage;
    if (scale == 0.0) continue;
    for (const auto& step : u.steps) policy.add_score(step.context, step.action, scale, probs, grad);
  }
  return grad;
}

double ppu_objective(std::span<const RatioUnit> units, const SoftmaxTable& candidate,
                     const SoftmaxTable& old, double eps) {
  const auto lc = all_log_probs(candidate);
  const auto lo = all_log_probs(old);
  double total = 0.0;
  for (const auto& u : units) {
    total += u.weight * clipped_term(unit_ratio(u, lc, lo, old), u.advantage, eps);
  }
  return total;
}

PpuGradient ppu_gradient(std::span<const RatioUnit> units, const SoftmaxTable& candidate,
                         const SoftmaxTable& old, double eps) {
  PpuGradient out;
  out.gradient.assign(candidate.size(), 0.0);
  const auto lc = all_log_probs(candidate);
  const auto lo = all_log_probs(old);
  const auto probs = candidate.all_probs();
  double active_weight = 0.0;
  double clipped_weight = 0.0;
  for (const auto& u : units) {
    if (u.steps.empty()) continue;
    active_weight += u.weight;
    const double r = unit_ratio(u, lc, lo, old);
    if (clip_active(r, u.advantage, eps)) {
      clipped_weight += u.weight;
      continue;
    }
    const double scale = u.weight * u.advantage * r;
    if (scale == 0.0) continue;
    for (const auto& step : u.steps) {
      candidate.add_score(step.context, step.action, scale, probs, out.gradient);
    }
  }
  out.clip_fraction = active_weight > 0.0 ? clipped_weight / active_weight : 0.0;
  return out;
}

std::vector<double> kl_penalty_gradient(std::span<const RatioUnit> units,
                                        const SoftmaxTable& candidate, double beta) {
  std::vector<double> grad(candidate.size(), 0.0);
  if (beta == 0.0) return grad;
  const auto probs = candidate.all_probs();
  for (const auto& u : units) {
    for (const auto& step : u.steps) {
      candidate.add_score(step.context, step.action, beta * u.weight, probs, grad);
    }
  }
  return grad;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void Optimizer::step(SoftmaxTable& table, std::span<const double> gradient) {
  if (!config_.adaptive) {
    table.ascend(gradient, config_.learning_rate);
    return;
  }
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  if (m_.size() != gradient.size()) {
    m_.assign(gradient.size(), 0.0);
    v_.assign(gradient.size(), 0.0);
    steps_ = 0;
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(steps_));
  std::vector<double> direction(gradient.size());
  for (std::size_t i = 0; i < gradient.size(); ++i) {
    m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * gradient[i];
    v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * gradient[i] * gradient[i];
    direction[i] = (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
  }
  table.ascend(direction, config_.learning_rate);
}

PpuUpdateStats ppu_ascent(std::span<const RatioUnit> units, SoftmaxTable& policy,
                          const SoftmaxTable& old, const UpdateConfig& config,
                          Optimizer& optimizer) {
  PpuUpdateStats stats;
  for (int e = 0; e < config.epochs_per_batch; ++e) {
    auto pg = ppu_gradient(units, policy, old, config.clip_epsilon);
    if (e == 0) stats.grad_norm = norm2(pg.gradient);
    if (config.kl_penalty_coefficient > 0.0) {
      const auto kl = kl_penalty_gradient(units, policy, config.kl_penalty_coefficient);
      for (std::size_t i = 0; i < kl.size(); ++i) pg.gradient[i] += kl[i];
    }
    optimizer.step(policy, pg.gradient);
  }
  const auto lc = all_log_probs(policy);
  const auto lo = all_log_probs(old);
  double active = 0.0;
  double clipped = 0.0;
  for (const auto& u : units) {
    if (u.steps.empty()) continue;
    active += u.weight;
    if (clip_active(unit_ratio(u, lc, lo, old), u.advantage, config.clip_epsilon)) clipped += u.weight;
  }
  stats.clip_fraction = active > 0.0 ? clipped / active : 0.0;
  return stats;
}

std::vector<AdvantageRecord> joint_advantages(const std::vector<Group>& groups,
                                              const UpdateConfig& config) {
  return apply_normalization(grae_records(groups, config.estimator == Estimator::kGraeLoo),
                             config.normalization);
}

std::vector<RatioUnit> sequence_units(const std::vector<Group>& groups,
                                      const std::vector<AdvantageRecord>& advantages,
                                      const TreePolicy& policy) {
  std::vector<RatioUnit> units;
  units.reserve(advantages.size());
  std::size_t i = 0;
  for (const auto& g : groups) {
    for (const auto& tr : g.trajectories) {
      if (i >= advantages.size()) throw std::invalid_argument("sequence_units: misaligned advantages");
      RatioUnit u;
      u.weight = advantages[i].weight;
      u.advantage = advantages[i].normalized;
      HistoryKey key{tr.s0, {}};
      for (int a : tr.actions) {
        if (a == kNoOp) break;
        u.steps.push_back({policy.context(key), a});
        key.prefix.push_back(a);
      }
      units.push_back(std::move(u));
      ++i;
    }
  }
  if (i != advantages.size()) throw std::invalid_argument("sequence_units: misaligned advantages");
  return units;
}

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kGaePpu: return "GAE-PPU";
    case Algorithm::kGraeReinforce: return "GRAE-REINFORCE";
    case Algorithm::kGraePpuToken: return "GRAE-PPU-token";
    case Algorithm::kGraePpuSeq: return "GRAE-PPU-seq";
    case Algorithm::kSeeUpo: return "SeeUPO";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "GAE-PPU" || name == "PPO") return Algorithm::kGaePpu;
  if (name == "GRAE-REINFORCE" || name == "RLOO") return Algorithm::kGraeReinforce;
  if (name == "GRAE-PPU-token" || name == "GRPO-like") return Algorithm::kGraePpuToken;
  if (name == "GRAE-PPU-seq" || name == "GSPO-like") return Algorithm::kGraePpuSeq;
  if (name == "SeeUPO") return Algorithm::kSeeUpo;
  throw std::invalid_argument("unknown algorithm: " + std::string(name));
}

void fill_advantage_stats(IterationRow& row, const std::vector<RatioUnit>& units) {
  double w = 0.0;
  double mean = 0.0;
  for (const auto& u : units) {
    w += u.weight;
    mean += u.weight * u.advantage;
  }
  mean = w > 0.0 ? mean / w : 0.0;
  double var = 0.0;
  for (const auto& u : units) var += u.weight * (u.advantage - mean) * (u.advantage - mean);
  row.advantage_mean = mean;
  row.advantage_std = w > 0.0 ? std::sqrt(var / w) : 0.0;
}

namespace {

void check_combination(Algorithm algorithm, const UpdateConfig& config, Mode mode) {
  validate(config);
  const bool gae = algorithm == Algorithm::kGaePpu;
  if (gae != (config.estimator == Estimator::kGae))
    throw std::invalid_argument(std::string(to_string(algorithm)) + " cannot use the " +
                                std::string(to_string(config.estimator)) + " estimator");
  if (gae && config.normalization == Normalization::kGroup)
    throw std::invalid_argument("group normalization needs a group-relative estimator");
  if (mode == Mode::kExact && config.estimator == Estimator::kGraeLoo)
    throw std::invalid_argument("leave-one-out baselines are only defined for sampled groups");
}

struct UnitBatch {
  std::vector<RatioUnit> units;
  std::vector<AdvantageRecord> records;
};

std::vector<AdvantageRecord> mdp_grae_records(const std::vector<MdpGroup>& groups, bool loo) {
  std::vector<AdvantageRecord> records;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    std::vector<double> rewards;
    std::vector<double> weights;
    for (const auto& tr : g.trajectories) {
      rewards.push_back(tr.total_reward);
      weights.push_back(tr.weight);
    }
    auto adv = grae_from_rewards(rewards, weights, loo);
    if (!loo) {
      for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = rewards[i] - g.mean_reward;
    }
    double wsum = 0.0;
    double var = 0.0;
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      wsum += weights[i];
      var += weights[i] * (rewards[i] - g.mean_reward) * (rewards[i] - g.mean_reward);
    }
    const double sd = wsum > 0.0 ? std::sqrt(var / wsum) : 0.0;
    for (std::size_t ti = 0; ti < adv.size(); ++ti) {
      AdvantageRecord rec;
      rec.group = static_cast<int>(gi);
      rec.trajectory = static_cast<int>(ti);
      rec.estimator = loo ? Estimator::kGraeLoo : Estimator::kGrae;
      rec.weight = g.weight * g.trajectories[ti].weight;
      rec.raw = adv[ti];
      rec.normalized = adv[ti];
      rec.group_std = sd;
      records.push_back(rec);
    }
  }
  return records;
}

UnitBatch mdp_exact_units(Algorithm algorithm, const FiniteMdpSpec& spec, const MdpPolicy& old,
                          const UpdateConfig& config) {
  UnitBatch batch;
  const int S = spec.num_states;
  const auto probs = old.table().all_probs();
  if (algorithm == Algorithm::kGaePpu) {
    const auto values = exact_values(spec, old, config.discount);
    const auto adv = expected_gae(spec, old, values.v, config.discount, config.gae_lambda);
    const auto occ = state_occupancy(spec, old);
    for (int t = 0; t < spec.horizon; ++t) {
      for (int s = 0; s < S; ++s) {
        if (occ[t][s] <= 0.0) continue;
        const int ctx = t * S + s;
        for (int a = 0; a < spec.num_actions; ++a) {
          batch.units.push_back({occ[t][s] * probs[old.table().offset(ctx) + a], adv[t][s][a], {{ctx, a}}});
        }
      }
    }
    if (config.normalization == Normalization::kBatch) {
      IterationRow stats;
      fill_advantage_stats(stats, batch.units);
      if (stats.advantage_std > kDegenerateStd) {
        for (auto& u : batch.units) u.advantage = (u.advantage - stats.advantage_mean) / stats.advantage_std;
      }
    }
    return batch;
  }

  // Group-relative: per-start conditional expectations so that per-start
  // normalization factors apply exactly.
  double mean = 0.0;
  double sd = 1.0;
  std::vector<double> group_sd(S, 1.0);
  if (config.normalization != Normalization::kNone) {
    const auto groups = enumerate_mdp_batch(spec, old);
    auto records = apply_normalization(mdp_grae_records(groups, false), config.normalization);
    if (config.normalization == Normalization::kBatch && !records.empty() && !records[0].degenerate) {
      mean = records[0].batch_mean;
      sd = records[0].batch_std;
    }
    if (config.normalization == Normalization::kGroup) {
      std::size_t i = 0;
      for (const auto& g : groups) {
        if (!records[i].degenerate) group_sd[g.s0] = records[i].group_std;
        i += g.trajectories.size();
      }
    }
  }
  for (int s0 = 0; s0 < S; ++s0) {
    const double d = spec.initial_distribution[s0];
    if (d <= 0.0) continue;
    const auto expect = expected_grae(spec, old, s0);
    for (int t = 0; t < spec.horizon; ++t) {
      for (int s = 0; s < S; ++s) {
        if (expect.occupancy[t][s] <= 0.0) continue;
        const int ctx = t * S + s;
        for (int a = 0; a < spec.num_actions; ++a) {
          const double w = d * expect.occupancy[t][s] * probs[old.table().offset(ctx) + a];
          const double adv = (expect.advantage[t][s][a] - mean) / sd / group_sd[s0];
          batch.units.push_back({w, adv, {{ctx, a}}});
        }
      }
    }
  }
  return batch;
}

UnitBatch mdp_sampled_units(Algorithm algorithm, const FiniteMdpSpec& spec, const MdpPolicy& old,
                            const RunSettings& settings, std::uint64_t batch_seed) {
  const auto& config = settings.update;
  UnitBatch batch;
  const auto groups =
      collect_mdp_batch(spec, old, settings.batch_size, settings.group_size, batch_seed);
  const int S = spec.num_states;
  if (algorithm == Algorithm::kGaePpu) {
    const auto values = exact_values(spec, old, config.discount);
    int traj_id = 0;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      for (const auto& tr : groups[gi].trajectories) {
        const auto adv = gae_estimate(tr, values.v, config.discount, config.gae_lambda);
        for (std::size_t t = 0; t < adv.size(); ++t) {
          AdvantageRecord rec;
          rec.group = static_cast<int>(gi);
          rec.trajectory = traj_id;
          rec.turn = static_cast<int>(t) + 1;
          rec.estimator = Estimator::kGae;
          rec.weight = groups[gi].weight * tr.weight;
          rec.raw = adv[t];
          rec.normalized = adv[t];
          batch.records.push_back(rec);
        }
        ++traj_id;
      }
    }
    batch.records = apply_normalization(std::move(batch.records), config.normalization);
    std::size_t i = 0;
    for (const auto& g : groups) {
      for (const auto& tr : g.trajectories) {
        for (std::size_t t = 0; t < tr.steps.size(); ++t, ++i) {
          const int ctx = static_cast<int>(t) * S + tr.steps[t].state;
          batch.units.push_back({batch.records[i].weight, batch.records[i].normalized,
                                 {{ctx, tr.steps[t].action}}});
        }
      }
    }
    return batch;
  }
  batch.records = apply_normalization(
      mdp_grae_records(groups, config.estimator == Estimator::kGraeLoo), config.normalization);
  std::size_t i = 0;
  for (const auto& g : groups) {
    for (const auto& tr : g.trajectories) {
      const auto& rec = batch.records[i++];
      for (std::size_t t = 0; t < tr.steps.size(); ++t) {
        const int ctx = static_cast<int>(t) * S + tr.steps[t].state;
        batch.units.push_back({rec.weight, rec.normalized, {{ctx, tr.steps[t].action}}});
      }
    }
  }
  return batch;
}

void finish_row(IterationRow& row, double j, const std::optional<double>& j_star) {
  row.j_exact = j;
  if (j_star) row.gap_to_optimal = *j_star - j;
}

}  // namespace

ExperimentReport run_algorithm(Algorithm algorithm, const FiniteMdpSpec& spec,
                               MdpPolicy& policy, const RunSettings& settings) {
  if (algorithm == Algorithm::kGraePpuSeq)
    throw std::invalid_argument("GRAE-PPU-seq needs a tree bandit (sequence-level ratios)");
  if (algorithm == Algorithm::kSeeUpo)
    throw std::invalid_argument("SeeUPO runs on tree bandits through run_seeupo");
  check_combination(algorithm, settings.update, settings.mode);
  validate(spec);
  const double gamma = settings.update.discount;

  ExperimentReport report;
  report.algorithm = std::string(to_string(algorithm));
  report.j_star = settings.j_star;
  IterationRow first;
  finish_row(first, exact_return(spec, policy, gamma), settings.j_star);
  report.rows.push_back(first);

  Optimizer optimizer(settings.update);
  for (int k = 1; k <= settings.iterations; ++k) {
    const MdpPolicy old = policy;
    const std::uint64_t batch_seed = derive_seed(settings.seed, "iteration.batch", k);
    UnitBatch batch = settings.mode == Mode::kExact
                          ? mdp_exact_units(algorithm, spec, old, settings.update)
                          : mdp_sampled_units(algorithm, spec, old, settings, batch_seed);
    IterationRow row;
    row.iteration = k;
    fill_advantage_stats(row, batch.units);
    if (algorithm == Algorithm::kGraeReinforce) {
      const auto g = reinforce_gradient(old.table(), batch.units);
      row.grad_norm = norm2(g);
      optimizer.step(policy.table(), g);
    } else {
      const auto stats = ppu_ascent(batch.units, policy.table(), old.table(), settings.update, optimizer);
      row.grad_norm = stats.grad_norm;
      row.clip_fraction = stats.clip_fraction;
    }
    finish_row(row, exact_return(spec, policy, gamma), settings.j_star);
    report.rows.push_back(std::move(row));
    if (settings.on_iteration) settings.on_iteration(k, policy.table());
    if (k == settings.iterations) report.final_advantages = std::move(batch.records);
  }
  return report;
}

ExperimentReport run_algorithm(Algorithm algorithm, const TreeBanditSpec& spec,
                               TreePolicy& policy, const RunSettings& settings) {
  if (algorithm == Algorithm::kSeeUpo)
    throw std::invalid_argument("SeeUPO runs through run_seeupo");
  if (algorithm == Algorithm::kGaePpu || algorithm == Algorithm::kGraePpuToken) {
    const auto view = token_view(spec);
    MdpPolicy token_policy = to_token_policy(policy, view);
    auto report = run_algorithm(algorithm, view, token_policy, settings);
    from_token_policy(token_policy, policy);
    return report;
  }
  check_combination(algorithm, settings.update, settings.mode);
  validate(spec);

  ExperimentReport report;
  report.algorithm = std::string(to_string(algorithm));
  report.j_star = settings.j_star;
  IterationRow first;
  finish_row(first, exact_return(spec, policy), settings.j_star);
  report.rows.push_back(first);

  Optimizer optimizer(settings.update);
  for (int k = 1; k <= settings.iterations; ++k) {
    const TreePolicy old = policy;
    const auto groups = settings.mode == Mode::kExact
                            ? enumerate_batch(spec, old)
                            : collect_batch(spec, old, settings.batch_size, settings.group_size,
                                            derive_seed(settings.seed, "iteration.batch", k));
    auto records = joint_advantages(groups, settings.update);
    const auto units = sequence_units(groups, records, old);
    IterationRow row;
    row.iteration = k;
    fill_advantage_stats(row, units);
    if (algorithm == Algorithm::kGraeReinforce) {
      const auto g = reinforce_gradient(old.table(), units);
      row.grad_norm = norm2(g);
      optimizer.step(policy.table(), g);
    } else {
      const auto stats = ppu_ascent(units, policy.table(), old.table(), settings.update, optimizer);
      row.grad_norm = stats.grad_norm;
      row.clip_fraction = stats.clip_fraction;
    }
    finish_row(row, exact_return(spec, policy), settings.j_star);
    report.rows.push_back(std::move(row));
    if (settings.on_iteration) settings.on_iteration(k, policy.table());
    if (k == settings.iterations) report.final_advantages = std::move(records);
  }
  return report;
}

}  // namespace turnrl
