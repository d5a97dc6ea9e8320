#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "turnrl/io.hpp"
#include "turnrl/seeupo.hpp"
#include "turnrl/suites.hpp"

namespace turnrl {

inline constexpr std::string_view kScorecardSchema = "turnrl.scorecard.v1";

struct VerifyOptions {
  std::uint64_t seed = kDefaultSuiteSeed;
  int threads = 1;  // results never depend on this
  int seeupo_iterations = 500;
  int drift_budget = 10000;
};

struct CheckResult {
  std::string id;
  bool passed = false;
  Json details;
};

// Check ids in their canonical order.
const std::vector<std::string>& verification_checks();
CheckResult run_check(std::string_view id, const VerifyOptions& options);
Json scorecard(const std::vector<CheckResult>& results, const VerifyOptions& options);

// Runs fn(i) for i in [0, n) on up to `threads` workers. Callers store results
// by index, so the outcome does not depend on scheduling. The first exception
// thrown by any task is rethrown.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

struct SuiteRun {
  int instance = 0;
  std::string order;
  double learning_rate = 0.0;
  double j_star = 0.0;
  double initial_j = 0.0;
  double final_j = 0.0;
  double max_decrease = 0.0;  // largest one-iteration drop in exact J
};

// Exact-mode SeeUPO from the uniform policy on every SeeUPO suite instance.
std::vector<SuiteRun> run_seeupo_suite(UpdateOrder order, const UpdateConfig& config,
                                       const VerifyOptions& options);

struct NormalizationRun {
  int instance = 0;
  std::string normalization;
  double j_star = 0.0;
  double final_j = 0.0;
  double max_decrease = 0.0;
};

// Exact-mode reverse-order SeeUPO on the suite under each normalization mode.
std::vector<NormalizationRun> compare_normalizations(const VerifyOptions& options);

std::string order_table_csv(const std::vector<SuiteRun>& runs);
std::string normalization_table_csv(const std::vector<NormalizationRun>& runs);

}  // namespace turnrl
