#include "turnrl/seeupo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "turnrl/advantage.hpp"

namespace turnrl {

std::string_view to_string(UpdateOrder order) {
  switch (order) {
    case UpdateOrder::kReverse: return "reverse";
    case UpdateOrder::kNatural: return "natural";
    case UpdateOrder::kRandom: return "random";
  }
  return "?";
}

UpdateOrder parse_update_order(std::string_view name) {
  if (name == "reverse") return UpdateOrder::kReverse;
  if (name == "natural") return UpdateOrder::kNatural;
  if (name == "random") return UpdateOrder::kRandom;
  throw std::invalid_argument("unknown update order: " + std::string(name));
}

std::vector<int> turn_sequence(UpdateOrder order, int horizon, Rng& rng) {
  std::vector<int> turns(horizon);
  std::iota(turns.begin(), turns.end(), 1);
  switch (order) {
    case UpdateOrder::kReverse:
      std::reverse(turns.begin(), turns.end());
      break;
    case UpdateOrder::kNatural:
      break;
    case UpdateOrder::kRandom:
      // Fisher-Yates with the library's own draws, so the permutation does not
      // depend on the standard library's shuffle.
      for (int i = horizon - 1; i > 0; --i) std::swap(turns[i], turns[rng.uniform_int(0, i)]);
      break;
  }
  return turns;
}

MTable init_M(const std::vector<Group>& groups, std::span<const double> advantages) {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.trajectories.size();
  if (n != advantages.size()) throw std::invalid_argument("init_M: one advantage per trajectory");
  return {{advantages.begin(), advantages.end()}, {}};
}

MTable update_M(MTable mtable, const TurnPool& pool, const TreePolicy& after,
                const TreePolicy& start) {
  if (pool.samples.size() != mtable.values.size())
    throw std::invalid_argument("update_M: pool and M table are misaligned");
  for (std::size_t i = 0; i < pool.samples.size(); ++i) {
    const auto& s = pool.samples[i];
    if (s.is_placeholder) continue;
    mtable.values[i] *= turn_ratio(after, start, s.key, s.action);
  }
  mtable.processed_turns.push_back(pool.turn);
  return mtable;
}

std::vector<RatioUnit> turn_units(const TurnPool& pool, const MTable& mtable,
                                  std::span<const double> weights, const TreePolicy& policy) {
  if (pool.samples.size() != mtable.values.size() || weights.size() != mtable.values.size())
    throw std::invalid_argument("turn_units: pool, weights and M table are misaligned");
  std::vector<RatioUnit> units(pool.samples.size());
  for (std::size_t i = 0; i < pool.samples.size(); ++i) {
    const auto& s = pool.samples[i];
    units[i].weight = weights[i];
    units[i].advantage = mtable.values[i];
    if (!s.is_placeholder) units[i].steps.push_back({policy.context(s.key), s.action});
  }
  return units;
}

TurnUpdateStats seeupo_turn_update(const TurnPool& pool, const MTable& mtable,
                                   std::span<const double> weights, TreePolicy& policy,
                                   const TreePolicy& start, const UpdateConfig& config,
                                   Optimizer& optimizer) {
  const auto units = turn_units(pool, mtable, weights, start);
  TurnUpdateStats stats;
  double w = 0.0;
  for (const auto& u : units) {
    if (u.steps.empty()) continue;
    w += u.weight;
    stats.mean_abs_m += u.weight * std::abs(u.advantage);
  }
  stats.mean_abs_m = w > 0.0 ? stats.mean_abs_m / w : 0.0;
  const auto ppu = ppu_ascent(units, policy.table(), start.table(), config, optimizer);
  stats.grad_norm = ppu.grad_norm;
  stats.clip_fraction = ppu.clip_fraction;
  return stats;
}

IterationRow seeupo_iteration(const TreeBanditSpec& spec, TreePolicy& policy,
                              const RunSettings& settings, UpdateOrder order, int iteration,
                              Optimizer& optimizer, const TurnObserver& observer,
                              std::vector<AdvantageRecord>* advantages_out) {
  const TreePolicy start = policy;
  const auto groups =
      settings.mode == Mode::kExact
          ? enumerate_batch(spec, start)
          : collect_batch(spec, start, settings.batch_size, settings.group_size,
                          derive_seed(settings.seed, "iteration.batch", iteration));
  auto records = joint_advantages(groups, settings.update);
  std::vector<double> advantages;
  std::vector<double> weights;
  for (const auto& r : records) {
    advantages.push_back(r.normalized);
    weights.push_back(r.weight);
  }
  MTable mtable = init_M(groups, advantages);
  const auto pools = build_turn_pools(groups, spec.horizon);
  Rng order_rng = Rng::derive(settings.seed, "seeupo.order", static_cast<std::uint64_t>(iteration));

  IterationRow row;
  row.iteration = iteration;
  row.order = std::string(to_string(order));
  row.turn_order = turn_sequence(order, spec.horizon, order_rng);
  row.turn_clip_fraction.assign(spec.horizon, 0.0);
  row.turn_mean_abs_m.assign(spec.horizon, 0.0);
  {
    std::vector<RatioUnit> joint(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) joint[i] = {weights[i], advantages[i], {}};
    fill_advantage_stats(row, joint);
  }
  double grad_sq = 0.0;
  double clip_sum = 0.0;
  for (int t : row.turn_order) {
    const auto& pool = pools[t - 1];
    const auto stats = seeupo_turn_update(pool, mtable, weights, policy, start, settings.update, optimizer);
    grad_sq += stats.grad_norm * stats.grad_norm;
    clip_sum += stats.clip_fraction;
    row.turn_clip_fraction[t - 1] = stats.clip_fraction;
    row.turn_mean_abs_m[t - 1] = stats.mean_abs_m;
    mtable = update_M(std::move(mtable), pool, policy, start);
    if (observer) observer(t, mtable, policy);
  }
  row.grad_norm = std::sqrt(grad_sq);
  row.clip_fraction = clip_sum / spec.horizon;
  row.j_exact = exact_return(spec, policy);
  if (settings.j_star) row.gap_to_optimal = *settings.j_star - row.j_exact;
  if (advantages_out) *advantages_out = std::move(records);
  return row;
}

ExperimentReport run_seeupo(const TreeBanditSpec& spec, TreePolicy& policy,
                            const RunSettings& settings, UpdateOrder order) {
  validate(settings.update);
  validate(spec);
  if (settings.mode == Mode::kExact && settings.update.estimator == Estimator::kGraeLoo)
    throw std::invalid_argument("leave-one-out baselines are only defined for sampled groups");
  if (settings.update.estimator == Estimator::kGae)
    throw std::invalid_argument("SeeUPO uses the group-relative joint advantage");
  ExperimentReport report;
  report.algorithm = "SeeUPO";
  report.j_star = settings.j_star;
  IterationRow first;
  first.order = std::string(to_string(order));
  first.j_exact = exact_return(spec, policy);
  if (settings.j_star) first.gap_to_optimal = *settings.j_star - first.j_exact;
  report.rows.push_back(first);
  Optimizer optimizer(settings.update);
  for (int k = 1; k <= settings.iterations; ++k) {
    std::vector<AdvantageRecord> records;
    report.rows.push_back(seeupo_iteration(spec, policy, settings, order, k, optimizer, {},
                                           k == settings.iterations ? &records : nullptr));
    if (settings.on_iteration) settings.on_iteration(k, policy.table());
    if (k == settings.iterations) report.final_advantages = std::move(records);
  }
  return report;
}

}  // namespace turnrl
