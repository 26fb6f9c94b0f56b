// Scenario runner behind the cqedsim command-line tool.

#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cqed::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitAssertion = 1;
inline constexpr int kExitUsage = 2;

/// Schema violations, unreadable files, bad values: exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
    std::string scenario;
    std::filesystem::path output_dir = "out";
    unsigned long long seed = 1;
    std::map<std::string, std::string> params;  // as written in the file
};

/// INI text with a [run] section (scenario, output_dir, seed) and a [params]
/// section. Unknown sections or keys, and values of the wrong type, throw
/// ConfigError.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);

std::vector<std::string> scenario_names();

/// Scenario parameters with defaults filled in, in schema order.
std::vector<std::pair<std::string, std::string>> resolved_params(const ScenarioConfig& cfg);

/// Column names of the per-run summary row used by sweeps.
std::vector<std::string> summary_columns(const std::string& scenario);

struct Assertion {
    std::string name;
    bool passed = true;
    std::string detail;
};

struct RunOutcome {
    int exit_code = kExitOk;
    std::vector<std::filesystem::path> files;
    std::vector<Assertion> assertions;
    std::vector<std::string> warnings;
};

/// Runs one scenario and writes its CSV/JSON artifacts and manifest.json
/// under the output directory (CQED_OUTPUT_DIR overrides it).
RunOutcome run(const ScenarioConfig& cfg);

/// One run per value of a numeric parameter, collated in input order into a
/// single CSV. An empty value list writes the header only.
RunOutcome sweep(const ScenarioConfig& cfg, const std::string& axis,
                 const std::vector<std::string>& values);

/// Output directory after the environment override.
std::filesystem::path effective_output_dir(const ScenarioConfig& cfg);

/// Full command-line entry point; returns the process exit code.
int main_entry(int argc, char** argv);

std::string version();

}  // namespace cqed::cli
