#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "turnrl/advantage.hpp"
#include "turnrl/envs.hpp"
#include "turnrl/policy.hpp"
#include "turnrl/updates.hpp"

namespace turnrl {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kReportSchema = "turnrl.report.v1";
inline constexpr std::string_view kOutputDirEnv = "TURNRL_OUTPUT_DIR";

Json to_json(const TreeBanditSpec& spec);
Json to_json(const FiniteMdpSpec& spec);
// Both validate the parsed spec.
TreeBanditSpec tree_spec_from_json(const Json& j);
FiniteMdpSpec mdp_spec_from_json(const Json& j);

Json to_json(const UpdateConfig& config);
// Fields absent from `j` keep the values of `defaults`; unknown fields throw.
UpdateConfig update_config_from_json(const Json& j, UpdateConfig defaults = {});

Json to_json(const PolicySnapshot& snapshot);
PolicySnapshot snapshot_from_json(const Json& j);
Json to_json(const AdvantageRecord& record);

// Shortest text that reads back to the same double.
std::string format_double(double x);

// CSV with the schema comment as its first line. Wall times, when given,
// become an extra column (one entry per row).
std::string report_csv(const ExperimentReport& report,
                       const std::vector<double>* wall_seconds = nullptr);
Json report_json(const ExperimentReport& report, const Json& config_echo);

// Writes to a sibling temporary file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);

// TURNRL_OUTPUT_DIR when set and non-empty, otherwise `configured`.
std::filesystem::path output_directory(const std::filesystem::path& configured);

}  // namespace turnrl
