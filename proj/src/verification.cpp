#include "turnrl/verification.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "turnrl/advantage.hpp"
#include "turnrl/random.hpp"
#include "turnrl/theory.hpp"

namespace turnrl {

namespace {

constexpr double kGaeUnbiasedTol = 1e-10;
constexpr double kGaeBoundSlack = 1e-10;
constexpr double kGraeBiasTol = 1e-10;
constexpr double kDegradationBiasTol = 1e-12;
constexpr double kGradientGapTol = 1e-8;
constexpr double kWitnessGapMin = 1e-3;
constexpr double kBanditTol = 1e-12;
constexpr double kFdGradientTol = 1e-6;
constexpr double kGspoReductionTol = 1e-12;
constexpr double kRatioTol = 1e-3;
constexpr double kMonotoneTol = 1e-9;
constexpr double kOptimalityTol = 1e-3;
constexpr double kOracleTol = 1e-12;
constexpr double kMTol = 1e-12;

constexpr int kMdpSuiteSize = 50;
constexpr int kTreeSuiteSize = 50;
constexpr int kPerturbations = 20;
constexpr int kMInstances = 10;
constexpr int kMIterations = 5;
constexpr int kDegeneracyInstances = 5;
constexpr int kDegeneracyIterations = 50;

const std::vector<double> kGammas = {0.5, 0.9, 0.99};
const std::vector<double> kLambdas = {0.0, 0.5, 0.95};
const std::vector<double> kEpsMax = {0.01, 0.1};
const std::vector<double> kAlphaSweep = {1.0, 2.0, 4.0, 8.0};

template <typename T>
std::vector<T> run_indexed(int n, int threads, const std::function<T(int)>& fn) {
  std::vector<T> out(n);
  parallel_for(n, threads, [&](int i) { out[i] = fn(i); });
  return out;
}

// --- GAE -------------------------------------------------------------------

CheckResult check_gae_unbiased(const VerifyOptions& o) {
  const auto suite = mdp_suite(o.seed, kMdpSuiteSize);
  const std::vector<double> gammas = {0.9, 1.0};
  auto errors = run_indexed<double>(kMdpSuiteSize, o.threads, [&](int i) {
    const auto& spec = suite[i];
    const auto policy = suite_policy(spec, o.seed, i);
    double worst = 0.0;
    for (double g : gammas) {
      const auto values = exact_values(spec, policy, g);
      for (double l : kLambdas) {
        const auto est = expected_gae(spec, policy, values.v, g, l);
        for (int t = 0; t < spec.horizon; ++t)
          for (int s = 0; s < spec.num_states; ++s)
            for (int a = 0; a < spec.num_actions; ++a)
              worst = std::max(worst, std::abs(est[t][s][a] - values.advantage(s, a, t)));
      }
    }
    return worst;
  });
  const double worst = *std::max_element(errors.begin(), errors.end());
  return {"gae-unbiased", worst <= kGaeUnbiasedTol,
          {{"instances", kMdpSuiteSize}, {"max_abs_error", worst}, {"tolerance", kGaeUnbiasedTol}}};
}

CheckResult check_gae_bias(const VerifyOptions& o) {
  const auto suite = mdp_suite(o.seed, kMdpSuiteSize);
  const std::size_t points = kGammas.size() * kLambdas.size() * kEpsMax.size();
  // worst[i][p] over instance i and grid point p.
  auto per_instance = run_indexed<std::vector<double>>(kMdpSuiteSize, o.threads, [&](int i) {
    const auto& spec = suite[i];
    const auto policy = suite_policy(spec, o.seed, i);
    std::vector<double> worst(points, 0.0);
    std::size_t p = 0;
    for (double g : kGammas) {
      const auto values = exact_values(spec, policy, g);
      for (double l : kLambdas) {
        for (double eps : kEpsMax) {
          Rng rng = Rng::derive(o.seed, "gae.perturb", static_cast<std::uint64_t>(i * 1000 + p));
          for (int k = 0; k < kPerturbations; ++k) {
            ValueGrid v = values.v;
            for (int t = 0; t < spec.horizon; ++t)
              for (double& x : v[t]) x += rng.uniform(-eps, eps);
            const auto est = expected_gae(spec, policy, v, g, l);
            for (int t = 0; t < spec.horizon; ++t)
              for (int s = 0; s < spec.num_states; ++s)
                for (int a = 0; a < spec.num_actions; ++a)
                  worst[p] = std::max(worst[p], std::abs(est[t][s][a] - values.advantage(s, a, t)));
          }
          ++p;
        }
      }
    }
    return worst;
  });
  Json grid = Json::array();
  bool ok = true;
  std::size_t p = 0;
  for (double g : kGammas) {
    for (double l : kLambdas) {
      for (double eps : kEpsMax) {
        double worst = 0.0;
        for (const auto& w : per_instance) worst = std::max(worst, w[p]);
        const double bound = gae_bias_bound(g, l, eps);
        const bool pass = worst <= bound + kGaeBoundSlack;
        ok = ok && pass;
        grid.push_back({{"gamma", g}, {"lambda", l}, {"eps_max", eps}, {"max_abs_bias", worst},
                        {"bound", bound}, {"passed", pass}});
        ++p;
      }
    }
  }
  return {"gae-bias", ok,
          {{"instances", kMdpSuiteSize}, {"perturbations_per_instance", kPerturbations}, {"grid", grid}}};
}

// --- GRAE ------------------------------------------------------------------

CheckResult check_grae_bias(const VerifyOptions& o) {
  const auto suite = mdp_suite(o.seed, kMdpSuiteSize, RewardTiming::kFinalStep);
  auto errors = run_indexed<double>(kMdpSuiteSize, o.threads, [&](int i) {
    const auto& spec = suite[i];
    const auto policy = suite_policy(spec, o.seed, i);
    const auto values = exact_values(spec, policy, 1.0);
    double worst = 0.0;
    for (int s0 = 0; s0 < spec.num_states; ++s0) {
      if (spec.initial_distribution[s0] <= 0.0) continue;
      const auto g = expected_grae(spec, policy, s0);
      for (int t = 0; t < spec.horizon; ++t) {
        for (int s = 0; s < spec.num_states; ++s) {
          if (g.occupancy[t][s] <= 0.0) continue;
          const double expected = values.v[t][s] - values.v[0][s0];
          for (int a = 0; a < spec.num_actions; ++a) {
            const double bias = g.advantage[t][s][a] - values.advantage(s, a, t);
            worst = std::max(worst, std::abs(bias - expected));
          }
        }
      }
    }
    return worst;
  });
  const double worst = *std::max_element(errors.begin(), errors.end());

  using namespace degradation;
  const auto deg = build_degradation_mdp();
  const auto ref = degradation_reference_policy(deg);
  const auto values = exact_values(deg, ref, 1.0);
  const auto g = expected_grae(deg, ref, kStart);
  const double bias_good = g.advantage[1][kBranch][kGood] - values.advantage(kBranch, kGood, 1);
  const double bias_bad = g.advantage[1][kBranch][kBad] - values.advantage(kBranch, kBad, 1);
  const bool deg_ok = std::abs(bias_good - 10.0) <= kDegradationBiasTol &&
                      std::abs(bias_bad - 10.0) <= kDegradationBiasTol;
  return {"grae-bias", worst <= kGraeBiasTol && deg_ok,
          {{"instances", kMdpSuiteSize},
           {"max_abs_error", worst},
           {"tolerance", kGraeBiasTol},
           {"degradation_bias_good", bias_good},
           {"degradation_bias_bad", bias_bad},
           {"degradation_tolerance", kDegradationBiasTol}}};
}

CheckResult check_grae_gradient(const VerifyOptions& o) {
  const auto suite = mdp_suite(o.seed, kMdpSuiteSize);
  auto gaps = run_indexed<double>(kMdpSuiteSize, o.threads, [&](int i) {
    return verify_grae_gradient(suite[i], suite_policy(suite[i], o.seed, i), 1.0).gap_norm;
  });
  const double worst = *std::max_element(gaps.begin(), gaps.end());
  const auto witness = build_discount_witness_mdp();
  const double witness_gap = verify_grae_gradient(witness, make_mdp_policy(witness), 0.9).gap_norm;
  return {"grae-gradient", worst < kGradientGapTol && witness_gap > kWitnessGapMin,
          {{"instances", kMdpSuiteSize},
           {"max_gap_undiscounted", worst},
           {"tolerance", kGradientGapTol},
           {"witness_gap_discounted", witness_gap},
           {"witness_minimum", kWitnessGapMin}}};
}

CheckResult check_bandit_unbiased(const VerifyOptions& o) {
  const auto suite = tree_bandit_suite(o.seed, kTreeSuiteSize);
  auto errors = run_indexed<double>(kTreeSuiteSize, o.threads, [&](int i) {
    const auto& spec = suite[i];
    const auto policy = suite_policy(spec, o.seed, i);
    const auto values = exact_values(spec, policy);
    const auto groups = enumerate_batch(spec, policy);
    const auto records = grae_records(groups, false);
    double worst = 0.0;
    std::size_t k = 0;
    for (const auto& g : groups)
      for (const auto& tr : g.trajectories)
        worst = std::max(worst, std::abs(records[k++].raw - (tr.reward - values.initial[g.s0])));
    return worst;
  });
  const double worst = *std::max_element(errors.begin(), errors.end());
  return {"bandit-unbiased", worst <= kBanditTol,
          {{"instances", kTreeSuiteSize}, {"max_abs_error", worst}, {"tolerance", kBanditTol}}};
}

// --- Drift -----------------------------------------------------------------

Json witness_json(const std::optional<DriftWitness>& w) {
  if (!w) return nullptr;
  return {{"old_probs", w->old_probs}, {"candidate_probs", w->candidate_probs},
          {"advantages", w->advantages}, {"value", w->value}, {"analytic", w->analytic}};
}

Json report_json(const DriftPropertyReport& r) {
  return {{"kind", to_string(r.kind)},
          {"parameter", r.parameter},
          {"seed", r.seed},
          {"draws", r.draws},
          {"violations", r.violations},
          {"min_drift", r.min_drift},
          {"max_abs_origin_value_error", r.max_abs_origin_value_error},
          {"max_origin_gradient_norm", r.max_origin_gradient_norm},
          {"witness", witness_json(r.witness)}};
}

CheckResult check_drift(const VerifyOptions& o) {
  struct Job {
    DriftKind kind;
    double parameter;
  };
  const std::vector<Job> jobs = {{DriftKind::kPpu, 0.0},     {DriftKind::kGraePpu, 1.0},
                                 {DriftKind::kGraePpu, 10.0}, {DriftKind::kGspo, 0.5},
                                 {DriftKind::kGspo, 2.0}};
  auto reports = run_indexed<DriftPropertyReport>(static_cast<int>(jobs.size()), o.threads, [&](int i) {
    return check_drift_properties(jobs[i].kind, jobs[i].parameter, o.drift_budget,
                                  derive_seed(o.seed, "drift", i));
  });
  bool ok = true;
  Json out = Json::array();
  for (const auto& r : reports) {
    bool pass = false;
    switch (r.kind) {
      case DriftKind::kPpu:
        pass = r.violations == 0 && r.max_abs_origin_value_error == 0.0 &&
               r.max_origin_gradient_norm < kFdGradientTol;
        break;
      case DriftKind::kGraePpu:
        pass = r.max_abs_origin_value_error == 0.0 && r.witness &&
               r.witness->value <= -r.parameter + 1e-9;
        break;
      case DriftKind::kGspo:
        pass = r.witness && r.witness->value < 0.0;
        break;
    }
    ok = ok && pass;
    auto j = report_json(r);
    j["passed"] = pass;
    out.push_back(std::move(j));
  }

  // With std = 1 the GSPO drift is the PPU drift.
  Rng rng = Rng::derive(o.seed, "drift.gspo_reduction");
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int n = rng.uniform_int(2, 5);
    std::vector<double> old(n), cand(n), adv(n);
    double so = 0.0, sc = 0.0;
    for (int i = 0; i < n; ++i) {
      so += (old[i] = 0.02 + rng.uniform());
      sc += (cand[i] = 0.02 + rng.uniform());
      adv[i] = rng.uniform(-1.0, 1.0);
    }
    for (int i = 0; i < n; ++i) {
      old[i] /= so;
      cand[i] /= sc;
    }
    worst = std::max(worst, std::abs(gspo_drift(old, cand, adv, 1.0, 0.2) - ppu_drift(old, cand, adv, 0.2)));
  }
  const bool reduction_ok = worst <= kGspoReductionTol;
  return {"drift", ok && reduction_ok,
          {{"budget", o.drift_budget},
           {"reports", out},
           {"gspo_unit_std_max_difference_from_ppu", worst},
           {"fd_gradient_tolerance", kFdGradientTol}}};
}

CheckResult check_degradation(const VerifyOptions&) {
  const auto r = reproduce_degradation();
  const bool ok = std::abs(r.ratio_bad_grae - 1.2) <= kRatioTol &&
                  std::abs(r.ratio_bad_true - 0.8) <= kRatioTol && r.j_after_grae < r.j_before;
  return {"degradation", ok,
          {{"learning_rate", r.learning_rate},
           {"v_start", r.v_start},
           {"v_branch", r.v_branch},
           {"structural_bias", r.structural_bias},
           {"true_advantages", {r.true_advantage_good, r.true_advantage_bad}},
           {"grae_advantages", {r.grae_advantage_good, r.grae_advantage_bad}},
           {"prob_bad_before", r.prob_bad_before},
           {"prob_bad_after_grae", r.prob_bad_after_grae},
           {"prob_bad_after_true", r.prob_bad_after_true},
           {"ratio_bad_grae", r.ratio_bad_grae},
           {"ratio_bad_true", r.ratio_bad_true},
           {"epochs_grae", r.epochs_grae},
           {"epochs_true", r.epochs_true},
           {"j_before", r.j_before},
           {"j_after_grae", r.j_after_grae},
           {"j_after_true", r.j_after_true},
           {"drift_at_origin", r.drift_at_origin},
           {"ratio_tolerance", kRatioTol}}};
}

// --- SeeUPO ----------------------------------------------------------------

Json suite_runs_json(const std::vector<SuiteRun>& runs) {
  Json out = Json::array();
  for (const auto& r : runs)
    out.push_back({{"instance", r.instance}, {"order", r.order}, {"learning_rate", r.learning_rate},
                   {"j_star", r.j_star}, {"initial_j", r.initial_j}, {"final_j", r.final_j},
                   {"gap", r.j_star - r.final_j}, {"max_decrease", r.max_decrease}});
  return out;
}

CheckResult check_seeupo_monotone(const VerifyOptions& o) {
  bool ok = true;
  Json sweep = Json::array();
  for (UpdateOrder order : {UpdateOrder::kReverse, UpdateOrder::kNatural}) {
    for (double alpha : kAlphaSweep) {
      auto config = seeupo_suite_config();
      config.learning_rate = alpha;
      const auto runs = run_seeupo_suite(order, config, o);
      double worst = 0.0;
      for (const auto& r : runs) worst = std::max(worst, r.max_decrease);
      const bool pass = worst <= kMonotoneTol;
      ok = ok && pass;
      sweep.push_back({{"order", to_string(order)}, {"learning_rate", alpha},
                       {"max_decrease", worst}, {"passed", pass}});
    }
  }
  return {"seeupo-monotone", ok,
          {{"iterations", o.seeupo_iterations},
           {"documented_config", to_json(seeupo_suite_config())},
           {"tolerance", kMonotoneTol},
           {"sweep", sweep}}};
}

CheckResult check_seeupo_optimal(const VerifyOptions& o) {
  const auto suite = seeupo_suite(o.seed);
  auto oracle = run_indexed<std::pair<double, double>>(static_cast<int>(suite.size()), o.threads, [&](int i) {
    return std::make_pair(backward_induction(suite[i]).j_star, brute_force_optimal(suite[i]).j_star);
  });
  bool oracle_ok = true;
  for (const auto& [bi, bf] : oracle) oracle_ok = oracle_ok && bi == bf;
  const auto runs = run_seeupo_suite(UpdateOrder::kReverse, seeupo_suite_config(), o);
  double worst_gap = 0.0;
  for (const auto& r : runs) worst_gap = std::max(worst_gap, r.j_star - r.final_j);
  Json oracle_json = Json::array();
  for (const auto& [bi, bf] : oracle) oracle_json.push_back({{"backward_induction", bi}, {"brute_force", bf}});
  return {"seeupo-optimal", oracle_ok && worst_gap <= kOptimalityTol,
          {{"iterations", o.seeupo_iterations},
           {"worst_gap", worst_gap},
           {"tolerance", kOptimalityTol},
           {"oracles_agree", oracle_ok},
           {"oracle", oracle_json},
           {"runs", suite_runs_json(runs)}}};
}

CheckResult check_oracle_crosscheck(const VerifyOptions& o) {
  const auto suite = seeupo_suite(derive_seed(o.seed, "oracle.crosscheck"), 50);
  auto diffs = run_indexed<double>(50, o.threads, [&](int i) {
    return std::abs(backward_induction(suite[i]).j_star - brute_force_optimal(suite[i]).j_star);
  });
  const double worst = *std::max_element(diffs.begin(), diffs.end());
  return {"oracle-crosscheck", worst <= kOracleTol,
          {{"instances", 50}, {"max_abs_difference", worst}, {"tolerance", kOracleTol}}};
}

CheckResult check_order_compare(const VerifyOptions& o) {
  Json table = Json::array();
  for (UpdateOrder order : {UpdateOrder::kReverse, UpdateOrder::kNatural, UpdateOrder::kRandom}) {
    for (auto& row : suite_runs_json(run_seeupo_suite(order, seeupo_suite_config(), o)))
      table.push_back(std::move(row));
  }
  return {"order-compare", true, {{"iterations", o.seeupo_iterations}, {"table", table}}};
}

CheckResult check_m_consistency(const VerifyOptions& o) {
  const auto suite = seeupo_suite(o.seed);
  struct Outcome {
    double worst = 0.0;
    int boundaries = 0;
  };
  auto outcomes = run_indexed<Outcome>(kMInstances * 2, o.threads, [&](int job) {
    const int i = job / 2;
    const auto& spec = suite[i];
    RunSettings settings;
    settings.update = seeupo_suite_config();
    settings.mode = job % 2 == 0 ? Mode::kExact : Mode::kSampled;
    settings.batch_size = 4;
    settings.group_size = 4;
    settings.seed = derive_seed(o.seed, "m_consistency", i);
    auto policy = make_tree_policy(spec);
    Optimizer optimizer(settings.update);
    Outcome out;
    for (int k = 1; k <= kMIterations; ++k) {
      const TreePolicy start = policy;
      const auto groups =
          settings.mode == Mode::kExact
              ? enumerate_batch(spec, start)
              : collect_batch(spec, start, settings.batch_size, settings.group_size,
                              derive_seed(settings.seed, "iteration.batch", k));
      const auto records = joint_advantages(groups, settings.update);
      auto observer = [&](int, const MTable& m, const TreePolicy& current) {
        std::size_t n = 0;
        for (const auto& g : groups) {
          for (const auto& tr : g.trajectories) {
            double num = 1.0, den = 1.0;
            HistoryKey key{tr.s0, {}};
            for (int t = 1; t <= spec.horizon; ++t) {
              const int a = tr.actions[t - 1];
              if (a == kNoOp) break;
              if (std::find(m.processed_turns.begin(), m.processed_turns.end(), t) != m.processed_turns.end()) {
                num *= current.table().prob(current.context(key), a);
                den *= start.table().prob(start.context(key), a);
              }
              key.prefix.push_back(a);
            }
            const double expected = records[n].normalized * num / den;
            const double err = std::abs(m.values[n] - expected) / std::max(1.0, std::abs(expected));
            out.worst = std::max(out.worst, err);
            ++n;
          }
        }
        ++out.boundaries;
      };
      seeupo_iteration(spec, policy, settings, UpdateOrder::kReverse, k, optimizer, observer);
    }
    return out;
  });
  double worst = 0.0;
  int boundaries = 0;
  for (const auto& x : outcomes) {
    worst = std::max(worst, x.worst);
    boundaries += x.boundaries;
  }
  return {"m-consistency", worst <= kMTol,
          {{"instances", kMInstances},
           {"iterations", kMIterations},
           {"modes", {"exact", "sampled"}},
           {"turn_boundaries_checked", boundaries},
           {"max_relative_error", worst},
           {"tolerance", kMTol}}};
}

CheckResult check_degeneracy(const VerifyOptions& o) {
  const auto suite = single_turn_suite(o.seed, kDegeneracyInstances);
  auto same = run_indexed<int>(kDegeneracyInstances * 2, o.threads, [&](int job) {
    const auto& spec = suite[job / 2];
    RunSettings settings;
    settings.update = seeupo_suite_config();
    settings.update.learning_rate = 1.0;
    settings.iterations = kDegeneracyIterations;
    settings.mode = job % 2 == 0 ? Mode::kExact : Mode::kSampled;
    settings.batch_size = 4;
    settings.group_size = 4;
    settings.seed = derive_seed(o.seed, "degeneracy", job);
    std::vector<std::vector<double>> a, b;
    auto seq_settings = settings;
    seq_settings.on_iteration = [&](int, const SoftmaxTable& t) { a.push_back(t.flat()); };
    auto see_settings = settings;
    see_settings.on_iteration = [&](int, const SoftmaxTable& t) { b.push_back(t.flat()); };
    auto p1 = make_tree_policy(spec);
    auto p2 = make_tree_policy(spec);
    const auto r1 = run_algorithm(Algorithm::kGraePpuSeq, spec, p1, seq_settings);
    const auto r2 = run_seeupo(spec, p2, see_settings, UpdateOrder::kReverse);
    bool eq = a == b && a.size() == static_cast<std::size_t>(kDegeneracyIterations);
    for (std::size_t k = 0; eq && k < r1.rows.size(); ++k) eq = r1.rows[k].j_exact == r2.rows[k].j_exact;
    return eq ? 1 : 0;
  });
  const int identical = static_cast<int>(std::count(same.begin(), same.end(), 1));
  return {"single-turn-degeneracy", identical == static_cast<int>(same.size()),
          {{"instances", kDegeneracyInstances},
           {"iterations", kDegeneracyIterations},
           {"modes", {"exact", "sampled"}},
           {"identical_runs", identical},
           {"runs", same.size()}}};
}

}  // namespace

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mu;
  int next = 0;
  std::exception_ptr error;
  auto work = [&] {
    while (true) {
      int i;
      {
        std::lock_guard lock(mu);
        if (next >= n || error) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<SuiteRun> run_seeupo_suite(UpdateOrder order, const UpdateConfig& config,
                                       const VerifyOptions& o) {
  const auto suite = seeupo_suite(o.seed);
  return run_indexed<SuiteRun>(static_cast<int>(suite.size()), o.threads, [&](int i) {
    const auto& spec = suite[i];
    RunSettings settings;
    settings.update = config;
    settings.iterations = o.seeupo_iterations;
    settings.seed = derive_seed(o.seed, "seeupo.suite", i);
    settings.j_star = backward_induction(spec).j_star;
    auto policy = make_tree_policy(spec);
    const auto report = run_seeupo(spec, policy, settings, order);
    SuiteRun r;
    r.instance = i;
    r.order = std::string(to_string(order));
    r.learning_rate = config.learning_rate;
    r.j_star = *settings.j_star;
    r.initial_j = report.rows.front().j_exact;
    r.final_j = report.rows.back().j_exact;
    for (std::size_t k = 1; k < report.rows.size(); ++k)
      r.max_decrease = std::max(r.max_decrease, report.rows[k - 1].j_exact - report.rows[k].j_exact);
    return r;
  });
}

std::vector<NormalizationRun> compare_normalizations(const VerifyOptions& o) {
  std::vector<NormalizationRun> out;
  for (Normalization n : {Normalization::kNone, Normalization::kBatch, Normalization::kGroup}) {
    auto config = seeupo_suite_config();
    config.normalization = n;
    for (const auto& r : run_seeupo_suite(UpdateOrder::kReverse, config, o))
      out.push_back({r.instance, std::string(to_string(n)), r.j_star, r.final_j, r.max_decrease});
  }
  return out;
}

std::string order_table_csv(const std::vector<SuiteRun>& runs) {
  std::ostringstream out;
  out << "# schema: turnrl.order_compare.v1\n";
  out << "instance,order,learning_rate,j_star,initial_j,final_j,gap,max_decrease\n";
  for (const auto& r : runs)
    out << r.instance << ',' << r.order << ',' << format_double(r.learning_rate) << ','
        << format_double(r.j_star) << ',' << format_double(r.initial_j) << ','
        << format_double(r.final_j) << ',' << format_double(r.j_star - r.final_j) << ','
        << format_double(r.max_decrease) << '\n';
  return out.str();
}

std::string normalization_table_csv(const std::vector<NormalizationRun>& runs) {
  std::ostringstream out;
  out << "# schema: turnrl.norm_compare.v1\n";
  out << "instance,normalization,j_star,final_j,gap,max_decrease\n";
  for (const auto& r : runs)
    out << r.instance << ',' << r.normalization << ',' << format_double(r.j_star) << ','
        << format_double(r.final_j) << ',' << format_double(r.j_star - r.final_j) << ','
        << format_double(r.max_decrease) << '\n';
  return out.str();
}

const std::vector<std::string>& verification_checks() {
  static const std::vector<std::string> ids = {
      "gae-unbiased",   "gae-bias",        "grae-bias",        "grae-gradient",
      "bandit-unbiased", "drift",          "degradation",      "seeupo-monotone",
      "seeupo-optimal", "oracle-crosscheck", "order-compare",  "m-consistency",
      "single-turn-degeneracy"};
  return ids;
}

CheckResult run_check(std::string_view id, const VerifyOptions& o) {
  if (id == "gae-unbiased") return check_gae_unbiased(o);
  if (id == "gae-bias") return check_gae_bias(o);
  if (id == "grae-bias") return check_grae_bias(o);
  if (id == "grae-gradient") return check_grae_gradient(o);
  if (id == "bandit-unbiased") return check_bandit_unbiased(o);
  if (id == "drift") return check_drift(o);
  if (id == "degradation") return check_degradation(o);
  if (id == "seeupo-monotone") return check_seeupo_monotone(o);
  if (id == "seeupo-optimal") return check_seeupo_optimal(o);
  if (id == "oracle-crosscheck") return check_oracle_crosscheck(o);
  if (id == "order-compare") return check_order_compare(o);
  if (id == "m-consistency") return check_m_consistency(o);
  if (id == "single-turn-degeneracy") return check_degeneracy(o);
  throw std::invalid_argument("unknown check: " + std::string(id));
}

Json scorecard(const std::vector<CheckResult>& results, const VerifyOptions& o) {
  Json j;
  j["schema"] = kScorecardSchema;
  j["seed"] = o.seed;
  j["seeupo_iterations"] = o.seeupo_iterations;
  j["drift_budget"] = o.drift_budget;
  bool all = true;
  Json checks = Json::array();
  for (const auto& r : results) {
    all = all && r.passed;
    checks.push_back({{"id", r.id}, {"passed", r.passed}, {"details", r.details}});
  }
  j["passed"] = all;
  j["checks"] = std::move(checks);
  return j;
}

}  // namespace turnrl
