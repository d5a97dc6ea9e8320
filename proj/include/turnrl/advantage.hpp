#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "turnrl/envs.hpp"
#include "turnrl/policy.hpp"
#include "turnrl/rollout.hpp"

namespace turnrl {

// v[t][s] for t in [0, H]; the row at H is the terminal zero row.
using ValueGrid = std::vector<std::vector<double>>;
// Indexed [t][s][a] for t in [0, H).
using StateActionTable = std::vector<std::vector<std::vector<double>>>;

struct MdpValueTable {
  double discount = 1.0;
  ValueGrid v;
  StateActionTable q;

  double advantage(int s, int a, int t) const { return q[t][s][a] - v[t][s]; }
};

MdpValueTable exact_values(const FiniteMdpSpec& spec, const MdpPolicy& policy);
MdpValueTable exact_values(const FiniteMdpSpec& spec, const MdpPolicy& policy, double discount);
double exact_return(const FiniteMdpSpec& spec, const MdpPolicy& policy, double discount);

struct TreeValueTable {
  std::vector<double> v;               // per policy context (history)
  std::vector<std::vector<double>> q;  // per context, per action
  std::vector<double> initial;         // V(s0)
  double expected_return = 0.0;        // J = sum_s0 d(s0) V(s0)
};

TreeValueTable exact_values(const TreeBanditSpec& spec, const TreePolicy& policy);
double exact_return(const TreeBanditSpec& spec, const TreePolicy& policy);

// P(s_t = s) for t in [0, H), from the initial distribution or from a fixed
// start state.
ValueGrid state_occupancy(const FiniteMdpSpec& spec, const MdpPolicy& policy,
                          std::optional<int> start = std::nullopt);

// Truncated sum of (gamma*lambda)-weighted TD errors along one trajectory.
// Throws when a needed value is missing or NaN.
std::vector<double> gae_estimate(const MdpTrajectory& trajectory, const ValueGrid& values,
                                 double gamma, double lambda);

// E[GAE_t | s_t = s, a_t = a] computed by backward recursion over the
// continuation distribution, with the critic given by `values`.
StateActionTable expected_gae(const FiniteMdpSpec& spec, const MdpPolicy& policy,
                              const ValueGrid& values, double gamma, double lambda);

// (1 + gamma - 2 gamma lambda) / (1 - gamma lambda) * eps_max.
double gae_bias_bound(double gamma, double lambda, double eps_max);

// E[R - V(s0) | s_t = s, a_t = a] for the token-level group-relative
// estimator, where R is the undiscounted total reward and the baseline is the
// exact undiscounted V(s0). Conditioned additionally on s0 when `start` is
// given. Entries where `occupancy` is zero are set to 0.
struct TokenGraeExpectation {
  ValueGrid occupancy;
  StateActionTable advantage;
};

TokenGraeExpectation expected_grae(const FiniteMdpSpec& spec, const MdpPolicy& policy,
                                   std::optional<int> start = std::nullopt);

// R_i minus the weighted mean of the group (or of the other members with
// leave-one-out). Requires at least two members for leave-one-out.
std::vector<double> grae_from_rewards(std::span<const double> rewards,
                                      std::span<const double> weights, bool leave_one_out);
std::vector<double> grae_estimate(const Group& group, bool leave_one_out);

enum class Estimator { kGae, kGrae, kGraeLoo };
enum class Normalization { kNone, kBatch, kGroup };

std::string_view to_string(Estimator e);
std::string_view to_string(Normalization n);
Estimator parse_estimator(std::string_view name);
Normalization parse_normalization(std::string_view name);

struct AdvantageRecord {
  int group = 0;
  int trajectory = 0;
  int turn = 0;  // 0 for a whole-trajectory (joint) advantage
  Estimator estimator = Estimator::kGrae;
  Normalization normalization = Normalization::kNone;
  double weight = 1.0;
  double raw = 0.0;
  double normalized = 0.0;
  double group_std = 0.0;
  double batch_mean = 0.0;
  double batch_std = 0.0;
  bool degenerate = false;
};

// Standard deviations below this are treated as zero by the normalizers.
inline constexpr double kDegenerateStd = 1e-12;

// Weighted population mean/std over all records; (raw - mean) / std.
std::vector<AdvantageRecord> normalize_batch(std::vector<AdvantageRecord> records);
// raw / group_std, per record.
std::vector<AdvantageRecord> normalize_group(std::vector<AdvantageRecord> records);

// One joint record per trajectory with weight group.weight * traj.weight and
// the group's weighted population reward std filled in.
std::vector<AdvantageRecord> grae_records(const std::vector<Group>& groups, bool leave_one_out);
std::vector<AdvantageRecord> apply_normalization(std::vector<AdvantageRecord> records,
                                                 Normalization mode);

}  // namespace turnrl
