#include "cqed/cli.hpp"

#include "scenarios.hpp"

#include "CLI11.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <atomic>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#ifndef CQED_VERSION
#define CQED_VERSION "unknown"
#endif

namespace cqed::cli {

using detail::ordered_json;

namespace {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

unsigned long long parse_seed(const std::string& text) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        if (!text.empty() && text[0] != '-') v = std::stoull(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size()) {
        throw ConfigError("[run] seed: expected a nonnegative integer, got '" + text + "'");
    }
    return v;
}

void write_text(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << body;
    if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ordered_json config_json(const detail::Scenario& s, const std::map<std::string, std::string>& v) {
    ordered_json out = ordered_json::object();
    for (const detail::ParamSpec& p : s.params) out[p.name] = v.at(p.name);
    return out;
}

ordered_json assertions_json(const std::vector<Assertion>& a) {
    ordered_json out = ordered_json::array();
    for (const Assertion& x : a) {
        out.push_back({{"name", x.name}, {"passed", x.passed}, {"detail", x.detail}});
    }
    return out;
}

// Prepares the output directory and the manifest fields common to run and sweep.
struct Emitter {
    fs::path dir;
    RunOutcome outcome;

    explicit Emitter(const ScenarioConfig& cfg) : dir(effective_output_dir(cfg)) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw ConfigError("cannot create '" + dir.string() + "': " + ec.message());
    }

    void file(const std::string& name, const std::string& body) {
        write_text(dir / name, body);
        outcome.files.push_back(dir / name);
    }

    void finish(ordered_json manifest) {
        ordered_json outputs = ordered_json::array();
        for (const fs::path& f : outcome.files) outputs.push_back(f.filename().string());
        manifest["outputs"] = outputs;
        manifest["exit_code"] = outcome.exit_code;
        file("manifest.json", manifest.dump(2) + "\n");
    }
};

ordered_json manifest_head(const ScenarioConfig& cfg, const detail::Scenario& s,
                           const std::map<std::string, std::string>& values,
                           const std::string& command) {
    return ordered_json{{"tool", "cqedsim"},
                        {"version", version()},
                        {"created_utc", utc_timestamp()},
                        {"command", command},
                        {"scenario", s.name},
                        {"seed", cfg.seed},
                        {"output_dir", effective_output_dir(cfg).string()},
                        {"config", config_json(s, values)}};
}

detail::ScenarioResult compute(const detail::Scenario& s,
                               const std::map<std::string, std::string>& values,
                               std::uint64_t seed) {
    try {
        return s.compute(detail::Params(values), seed);
    } catch (const std::invalid_argument& e) {
        // Library precondition failures are configuration errors at this boundary.
        throw ConfigError(e.what());
    }
}

int exit_for(const std::vector<Assertion>& a) {
    for (const Assertion& x : a) {
        if (!x.passed) return kExitAssertion;
    }
    return kExitOk;
}

RunOutcome structured_failure(Emitter& em, ordered_json manifest, const ordered_json& record) {
    em.outcome.exit_code = kExitUsage;
    em.outcome.warnings.push_back(record.dump());
    em.file("error.json", record.dump(2) + "\n");
    manifest["error"] = record;
    em.finish(std::move(manifest));
    return em.outcome;
}

std::vector<std::string> split_values(const std::string& text) {
    std::vector<std::string> out;
    if (text.find_first_not_of(" \t") == std::string::npos) return out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) out.push_back(item);
    if (text.back() == ',') out.emplace_back();
    return out;
}

void print_outcome(const RunOutcome& o) {
    const char* tag = o.exit_code == kExitUsage ? "error: " : "warning: ";
    for (const std::string& w : o.warnings) std::cerr << tag << w << "\n";
    for (const Assertion& a : o.assertions) {
        std::cout << (a.passed ? "PASS " : "FAIL ") << a.name << ": " << a.detail << "\n";
    }
    for (const fs::path& f : o.files) std::cout << "wrote " << f.string() << "\n";
}

}  // namespace

std::string version() { return CQED_VERSION; }

ScenarioConfig parse_config(const std::string& text) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.message() + " (line " +
                          std::to_string(e.line()) + ")");
    }
    ScenarioConfig cfg;
    bool have_scenario = false;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) {
            throw ConfigError("config: key '" + section + "' outside a section");
        }
        if (section == "run") {
            for (const auto& [key, node] : body) {
                const std::string value = node.get_value<std::string>();
                if (key == "scenario") {
                    cfg.scenario = value;
                    have_scenario = true;
                } else if (key == "output_dir") {
                    if (value.empty()) throw ConfigError("[run] output_dir must not be empty");
                    cfg.output_dir = value;
                } else if (key == "seed") {
                    cfg.seed = parse_seed(value);
                } else {
                    throw ConfigError("config: unknown key '" + key + "' in [run]");
                }
            }
        } else if (section == "params") {
            for (const auto& [key, node] : body) cfg.params[key] = node.get_value<std::string>();
        } else {
            throw ConfigError("config: unknown section [" + section + "]");
        }
    }
    if (!have_scenario) throw ConfigError("config: [run] scenario is required");
    detail::resolve(detail::find_scenario(cfg.scenario), cfg.params);
    return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::vector<std::string> scenario_names() {
    std::vector<std::string> out;
    for (const detail::Scenario& s : detail::registry()) out.push_back(s.name);
    return out;
}

std::vector<std::pair<std::string, std::string>> resolved_params(const ScenarioConfig& cfg) {
    const detail::Scenario& s = detail::find_scenario(cfg.scenario);
    const auto values = detail::resolve(s, cfg.params);
    std::vector<std::pair<std::string, std::string>> out;
    for (const detail::ParamSpec& p : s.params) out.emplace_back(p.name, values.at(p.name));
    return out;
}

std::vector<std::string> summary_columns(const std::string& scenario) {
    return detail::find_scenario(scenario).summary;
}

std::filesystem::path effective_output_dir(const ScenarioConfig& cfg) {
    if (const char* env = std::getenv("CQED_OUTPUT_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return cfg.output_dir;
}

RunOutcome run(const ScenarioConfig& cfg) {
    const detail::Scenario& s = detail::find_scenario(cfg.scenario);
    const auto values = detail::resolve(s, cfg.params);
    Emitter em(cfg);
    ordered_json manifest = manifest_head(cfg, s, values, "run");

    detail::ScenarioResult r;
    try {
        r = compute(s, values, cfg.seed);
    } catch (const detail::StructuredError& e) {
        return structured_failure(em, std::move(manifest), e.record());
    }
    for (const detail::Table& t : r.tables) em.file(t.file, detail::render_csv(t));

    ordered_json summary = ordered_json::object();
    for (std::size_t i = 0; i < s.summary.size(); ++i) summary[s.summary[i]] = r.summary[i];
    const ordered_json report{{"scenario", s.name},
                              {"summary", summary},
                              {"results", r.report},
                              {"assertions", assertions_json(r.assertions)},
                              {"warnings", r.warnings}};
    em.file("report.json", report.dump(2) + "\n");

    em.outcome.assertions = r.assertions;
    em.outcome.warnings = r.warnings;
    em.outcome.exit_code = exit_for(r.assertions);
    manifest["units"] = r.units;
    em.finish(std::move(manifest));
    return em.outcome;
}

RunOutcome sweep(const ScenarioConfig& cfg, const std::string& axis,
                 const std::vector<std::string>& values) {
    const detail::Scenario& s = detail::find_scenario(cfg.scenario);
    const detail::ParamSpec* spec = detail::find_param(s, axis);
    if (spec == nullptr) {
        throw ConfigError(fmt::format("sweep axis '{}' is not a parameter of '{}'", axis, s.name));
    }
    if (!detail::is_numeric(spec->kind)) {
        throw ConfigError(fmt::format("sweep axis '{}' is not numeric", axis));
    }
    const auto base = detail::resolve(s, cfg.params);
    std::vector<std::map<std::string, std::string>> runs;
    std::vector<double> axis_values;
    for (const std::string& v : values) {
        detail::check_value(*spec, v);
        auto p = base;
        p[axis] = v;
        runs.push_back(std::move(p));
        axis_values.push_back(detail::Params(runs.back()).real(axis));
    }

    // Fixed pool; results land in their input slot so collation order is the input order.
    const std::size_t n = runs.size();
    std::vector<std::optional<detail::ScenarioResult>> results(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    const std::size_t workers =
        std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    {
        std::vector<std::future<void>> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.push_back(std::async(std::launch::async, [&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        results[i] = compute(s, runs[i], cfg.seed);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            }));
        }
        for (auto& f : pool) f.get();
    }

    Emitter em(cfg);
    ordered_json manifest = manifest_head(cfg, s, base, "sweep");
    manifest["axis"] = axis;
    manifest["values"] = values;
    for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const detail::StructuredError& e) {
            ordered_json record = e.record();
            record["sweep_value"] = values[i];
            return structured_failure(em, std::move(manifest), record);
        }
    }

    detail::Table table{fmt::format("sweep_{}.csv", axis),
                        {fmt::format("{}: swept parameter of {}", axis, s.name),
                         fmt::format("remaining columns: per-run summary of {}", s.name)},
                        {axis},
                        {}};
    for (const std::string& c : s.summary) table.columns.push_back(c);
    ordered_json per_run = ordered_json::array();
    for (std::size_t i = 0; i < n; ++i) {
        const detail::ScenarioResult& r = *results[i];
        std::vector<double> row{axis_values[i]};
        row.insert(row.end(), r.summary.begin(), r.summary.end());
        table.rows.push_back(std::move(row));
        for (const Assertion& a : r.assertions) {
            em.outcome.assertions.push_back({fmt::format("{}={} {}", axis, values[i], a.name),
                                             a.passed, a.detail});
        }
        for (const std::string& w : r.warnings) {
            em.outcome.warnings.push_back(fmt::format("{}={}: {}", axis, values[i], w));
        }
        per_run.push_back({{axis, values[i]},
                           {"results", r.report},
                           {"assertions", assertions_json(r.assertions)}});
    }
    em.file(table.file, detail::render_csv(table));
    em.file("report.json",
            ordered_json{{"scenario", s.name}, {"axis", axis}, {"runs", per_run}}.dump(2) + "\n");
    em.outcome.exit_code = exit_for(em.outcome.assertions);
    if (!results.empty()) manifest["units"] = results.front()->units;
    em.finish(std::move(manifest));
    return em.outcome;
}

int main_entry(int argc, char** argv) {
    CLI::App app{"Cavity QED memory and collective-gate scenarios", "cqedsim"};
    app.set_version_flag("--version", version());
    app.require_subcommand(1);

    std::string config_path, axis, values;
    CLI::App* run_cmd = app.add_subcommand("run", "Run one scenario");
    run_cmd->add_option("--config", config_path, "INI config file")->required();
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run a scenario over parameter values");
    sweep_cmd->add_option("--config", config_path, "INI config file")->required();
    sweep_cmd->add_option("--axis", axis, "numeric parameter to vary")->required();
    sweep_cmd->add_option("--values", values, "comma-separated values; may be empty")->required();
    CLI::App* list_cmd = app.add_subcommand("list", "List scenarios and their parameters");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (list_cmd->parsed()) {
            for (const detail::Scenario& s : detail::registry()) {
                std::cout << s.name << "\n";
                for (const detail::ParamSpec& p : s.params) {
                    std::cout << fmt::format("  {:<22} = {:<20} {}\n", p.name, p.fallback, p.help);
                }
            }
            return kExitOk;
        }
        const ScenarioConfig cfg = load_config(config_path);
        const RunOutcome o = run_cmd->parsed() ? run(cfg) : sweep(cfg, axis, split_values(values));
        print_outcome(o);
        return o.exit_code;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n"
                  << "usage: cqedsim run --config <file> | cqedsim sweep --config <file> "
                     "--axis <name> --values <list>\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

}  // namespace cqed::cli
