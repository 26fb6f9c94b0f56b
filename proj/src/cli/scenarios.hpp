// Scenario registry shared by the config parser and the runner.

#pragma once

#include "cqed/cli.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace cqed::cli::detail {

using nlohmann::ordered_json;

enum class Kind { Real, Integer, Bool, RealList, TupleList, Text };

struct ParamSpec {
    std::string name;
    Kind kind;
    std::string fallback;
    std::string help;
};

bool is_numeric(Kind k);

/// Throws ConfigError when `value` does not parse as `kind`.
void check_value(const ParamSpec& spec, const std::string& value);

class Params {
public:
    explicit Params(std::map<std::string, std::string> values) : values_(std::move(values)) {}
    double real(const std::string& key) const;
    long long integer(const std::string& key) const;
    bool flag(const std::string& key) const;
    std::vector<double> reals(const std::string& key) const;
    std::vector<std::array<int, 3>> tuples(const std::string& key) const;
    const std::string& text(const std::string& key) const;

private:
    std::map<std::string, std::string> values_;
};

struct Table {
    std::string file;
    std::vector<std::string> comments;  // written as '# ' lines
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct ScenarioResult {
    std::vector<Table> tables;
    std::vector<double> summary;  // one value per Scenario::summary entry
    ordered_json report = ordered_json::object();
    ordered_json units = ordered_json::object();
    std::vector<Assertion> assertions;
    std::vector<std::string> warnings;
};

/// A failure that is reported as a JSON record rather than a usage message.
class StructuredError : public std::runtime_error {
public:
    explicit StructuredError(ordered_json record)
        : std::runtime_error(record.value("message", std::string("error"))),
          record_(std::move(record)) {}
    const ordered_json& record() const { return record_; }

private:
    ordered_json record_;
};

struct Scenario {
    std::string name;
    std::vector<ParamSpec> params;
    std::vector<std::string> summary;
    std::function<ScenarioResult(const Params&, std::uint64_t seed)> compute;
};

const std::vector<Scenario>& registry();
/// Throws ConfigError for an unknown name.
const Scenario& find_scenario(const std::string& name);
const ParamSpec* find_param(const Scenario& s, const std::string& key);

/// Schema defaults overlaid with the config's values.
std::map<std::string, std::string> resolve(const Scenario& s,
                                           const std::map<std::string, std::string>& given);

std::string format_number(double v);
std::string render_csv(const Table& t);

}  // namespace cqed::cli::detail
