#include "turnrl/io.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace turnrl {

namespace {

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + ": expected an object");
  const std::set<std::string_view> ok(allowed);
  for (const auto& item : j.items()) {
    if (!ok.contains(item.key()))
      throw std::invalid_argument(std::string(what) + ": unknown field '" + item.key() + "'");
  }
}

std::string_view to_string(RewardTiming timing) {
  return timing == RewardTiming::kEveryStep ? "every_step" : "final_step";
}

RewardTiming parse_timing(std::string_view name) {
  if (name == "every_step") return RewardTiming::kEveryStep;
  if (name == "final_step") return RewardTiming::kFinalStep;
  throw std::invalid_argument("unknown reward timing: " + std::string(name));
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ';';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

}  // namespace

Json to_json(const TreeBanditSpec& spec) {
  Json j;
  j["kind"] = "tree";
  j["num_initial_states"] = spec.num_initial_states;
  j["horizon"] = spec.horizon;
  j["actions_per_turn"] = spec.actions_per_turn;
  j["initial_distribution"] = spec.initial_distribution;
  j["reward_bound"] = spec.reward_bound;
  j["reward_table"] = spec.reward_table;
  Json ends = Json::array();
  for (const auto& p : spec.terminal_prefixes) ends.push_back({{"s0", p.s0}, {"prefix", p.prefix}});
  j["terminal_prefixes"] = ends;
  return j;
}

Json to_json(const FiniteMdpSpec& spec) {
  Json j;
  j["kind"] = "mdp";
  j["num_states"] = spec.num_states;
  j["num_actions"] = spec.num_actions;
  j["horizon"] = spec.horizon;
  j["discount"] = spec.discount;
  j["reward_timing"] = to_string(spec.reward_timing);
  j["initial_distribution"] = spec.initial_distribution;
  j["transition"] = spec.transition;
  j["reward"] = spec.reward;
  return j;
}

TreeBanditSpec tree_spec_from_json(const Json& j) {
  check_keys(j, {"kind", "num_initial_states", "horizon", "actions_per_turn", "initial_distribution",
                 "reward_bound", "reward_table", "terminal_prefixes"},
             "tree spec");
  if (j.value("kind", "tree") != "tree") throw std::invalid_argument("tree spec: kind must be 'tree'");
  TreeBanditSpec spec;
  spec.num_initial_states = j.at("num_initial_states").get<int>();
  spec.horizon = j.at("horizon").get<int>();
  spec.actions_per_turn = j.at("actions_per_turn").get<std::vector<int>>();
  spec.initial_distribution = j.at("initial_distribution").get<std::vector<double>>();
  spec.reward_table = j.at("reward_table").get<std::vector<std::vector<double>>>();
  if (j.contains("reward_bound")) {
    spec.reward_bound = j.at("reward_bound").get<double>();
  } else {
    for (const auto& row : spec.reward_table)
      for (double r : row) spec.reward_bound = std::max(spec.reward_bound, std::abs(r));
  }
  if (j.contains("terminal_prefixes")) {
    for (const auto& p : j.at("terminal_prefixes")) {
      check_keys(p, {"s0", "prefix"}, "terminal prefix");
      spec.terminal_prefixes.push_back({p.at("s0").get<int>(), p.at("prefix").get<std::vector<int>>()});
    }
  }
  validate(spec);
  return spec;
}

FiniteMdpSpec mdp_spec_from_json(const Json& j) {
  check_keys(j, {"kind", "num_states", "num_actions", "horizon", "discount", "reward_timing",
                 "initial_distribution", "transition", "reward"},
             "mdp spec");
  if (j.value("kind", "mdp") != "mdp") throw std::invalid_argument("mdp spec: kind must be 'mdp'");
  FiniteMdpSpec spec;
  spec.num_states = j.at("num_states").get<int>();
  spec.num_actions = j.at("num_actions").get<int>();
  spec.horizon = j.at("horizon").get<int>();
  spec.discount = j.value("discount", 1.0);
  spec.reward_timing = parse_timing(j.value("reward_timing", std::string("every_step")));
  spec.initial_distribution = j.at("initial_distribution").get<std::vector<double>>();
  spec.transition = j.at("transition").get<std::vector<std::vector<std::vector<double>>>>();
  spec.reward = j.at("reward").get<std::vector<std::vector<double>>>();
  validate(spec);
  return spec;
}

Json to_json(const UpdateConfig& c) {
  Json j;
  j["learning_rate"] = c.learning_rate;
  j["clip_epsilon"] = c.clip_epsilon;
  j["epochs_per_batch"] = c.epochs_per_batch;
  j["kl_penalty_coefficient"] = c.kl_penalty_coefficient;
  j["discount"] = c.discount;
  j["gae_lambda"] = c.gae_lambda;
  j["normalization"] = to_string(c.normalization);
  j["estimator"] = to_string(c.estimator);
  j["adaptive"] = c.adaptive;
  return j;
}

UpdateConfig update_config_from_json(const Json& j, UpdateConfig c) {
  check_keys(j, {"learning_rate", "clip_epsilon", "epochs_per_batch", "kl_penalty_coefficient",
                 "discount", "gae_lambda", "normalization", "estimator", "adaptive"},
             "update");
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.clip_epsilon = j.value("clip_epsilon", c.clip_epsilon);
  c.epochs_per_batch = j.value("epochs_per_batch", c.epochs_per_batch);
  c.kl_penalty_coefficient = j.value("kl_penalty_coefficient", c.kl_penalty_coefficient);
  c.discount = j.value("discount", c.discount);
  c.gae_lambda = j.value("gae_lambda", c.gae_lambda);
  if (j.contains("normalization")) c.normalization = parse_normalization(j.at("normalization").get<std::string>());
  if (j.contains("estimator")) c.estimator = parse_estimator(j.at("estimator").get<std::string>());
  c.adaptive = j.value("adaptive", c.adaptive);
  validate(c);
  return c;
}

Json to_json(const PolicySnapshot& snapshot) { return Json{{"logits", snapshot.logits}}; }

PolicySnapshot snapshot_from_json(const Json& j) {
  check_keys(j, {"logits"}, "policy snapshot");
  return {j.at("logits").get<std::vector<double>>()};
}

Json to_json(const AdvantageRecord& r) {
  Json j;
  j["group"] = r.group;
  j["trajectory"] = r.trajectory;
  j["turn"] = r.turn;
  j["estimator"] = to_string(r.estimator);
  j["normalization"] = to_string(r.normalization);
  j["weight"] = r.weight;
  j["raw"] = r.raw;
  j["normalized"] = r.normalized;
  j["group_std"] = r.group_std;
  j["batch_mean"] = r.batch_mean;
  j["batch_std"] = r.batch_std;
  j["degenerate"] = r.degenerate;
  return j;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string report_csv(const ExperimentReport& report, const std::vector<double>* wall_seconds) {
  if (wall_seconds && wall_seconds->size() != report.rows.size())
    throw std::invalid_argument("report_csv: one wall time per row");
  std::ostringstream out;
  out << "# schema: " << kReportSchema << '\n';
  out << "iteration,j_exact,gap_to_optimal,grad_norm,clip_fraction,advantage_mean,advantage_std,"
         "order,turn_order,turn_clip_fraction,turn_mean_abs_m";
  if (wall_seconds) out << ",wall_seconds";
  out << '\n';
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    out << r.iteration << ',' << format_double(r.j_exact) << ','
        << (r.gap_to_optimal ? format_double(*r.gap_to_optimal) : "") << ','
        << format_double(r.grad_norm) << ',' << format_double(r.clip_fraction) << ','
        << format_double(r.advantage_mean) << ',' << format_double(r.advantage_std) << ','
        << r.order << ',' << join(r.turn_order) << ',' << join(r.turn_clip_fraction) << ','
        << join(r.turn_mean_abs_m);
    if (wall_seconds) out << ',' << format_double((*wall_seconds)[i]);
    out << '\n';
  }
  return out.str();
}

Json report_json(const ExperimentReport& report, const Json& config_echo) {
  Json j;
  j["schema"] = kReportSchema;
  j["config"] = config_echo;
  j["algorithm"] = report.algorithm;
  j["j_star"] = report.j_star ? Json(*report.j_star) : Json(nullptr);
  Json rows = Json::array();
  double max_decrease = 0.0;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    Json row;
    row["iteration"] = r.iteration;
    row["j_exact"] = r.j_exact;
    row["gap_to_optimal"] = r.gap_to_optimal ? Json(*r.gap_to_optimal) : Json(nullptr);
    row["grad_norm"] = r.grad_norm;
    row["clip_fraction"] = r.clip_fraction;
    row["advantage_mean"] = r.advantage_mean;
    row["advantage_std"] = r.advantage_std;
    if (!r.order.empty()) {
      row["order"] = r.order;
      row["turn_order"] = r.turn_order;
      row["turn_clip_fraction"] = r.turn_clip_fraction;
      row["turn_mean_abs_m"] = r.turn_mean_abs_m;
    }
    rows.push_back(std::move(row));
    if (i > 0) max_decrease = std::max(max_decrease, report.rows[i - 1].j_exact - r.j_exact);
  }
  j["rows"] = std::move(rows);
  Json summary;
  summary["iterations"] = report.rows.empty() ? 0 : report.rows.back().iteration;
  if (!report.rows.empty()) {
    summary["initial_j"] = report.rows.front().j_exact;
    summary["final_j"] = report.rows.back().j_exact;
    summary["final_gap"] = report.rows.back().gap_to_optimal
                               ? Json(*report.rows.back().gap_to_optimal)
                               : Json(nullptr);
  }
  summary["max_decrease"] = max_decrease;
  j["summary"] = std::move(summary);
  Json adv = Json::array();
  for (const auto& r : report.final_advantages) adv.push_back(to_json(r));
  j["final_advantages"] = std::move(adv);
  return j;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Json read_json(const std::filesystem::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::filesystem::path output_directory(const std::filesystem::path& configured) {
  const char* env = std::getenv(std::string(kOutputDirEnv).c_str());
  if (env && *env) return env;
  return configured;
}

}  // namespace turnrl
