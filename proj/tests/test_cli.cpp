#include "cqed/cli.hpp"

#include "json.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <iomanip>
#include <sstream>

#include <unistd.h>

using namespace cqed::cli;
namespace fs = std::filesystem;

namespace {

struct Csv {
    std::vector<std::string> comments;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t col(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i] == name) return i;
        }
        throw std::out_of_range("no column " + name);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Csv read_csv(const fs::path& p) {
    Csv c;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("#", 0) == 0) {
            c.comments.push_back(line);
            continue;
        }
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (c.columns.empty()) {
            c.columns = cells;
        } else {
            std::vector<double> row;
            for (const std::string& x : cells) row.push_back(std::strtod(x.c_str(), nullptr));
            c.rows.push_back(row);
        }
    }
    return c;
}

// Strips '#' lines so bodies can be compared.
std::string csv_body(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::string line, out;
    while (std::getline(in, line)) {
        if (line.rfind("#", 0) != 0) out += line + "\n";
    }
    return out;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        root_ = fs::temp_directory_path() /
                (std::string("cqed_cli_") + info->name() + "_" + std::to_string(::getpid()));
        fs::remove_all(root_);
        fs::create_directories(root_);
        ::unsetenv("CQED_OUTPUT_DIR");
    }
    void TearDown() override {
        ::unsetenv("CQED_OUTPUT_DIR");
        fs::remove_all(root_);
    }

    ScenarioConfig config(const std::string& scenario, std::map<std::string, std::string> params,
                          const std::string& sub = "out") {
        ScenarioConfig c;
        c.scenario = scenario;
        c.output_dir = root_ / sub;
        c.params = std::move(params);
        return c;
    }

    fs::path write_ini(const std::string& name, const std::string& text) {
        const fs::path p = root_ / name;
        std::ofstream(p) << text;
        return p;
    }

    int invoke(std::vector<std::string> args) {
        args.insert(args.begin(), "cqedsim");
        std::vector<char*> argv;
        for (std::string& a : args) argv.push_back(a.data());
        return main_entry(static_cast<int>(argv.size()), argv.data());
    }

    fs::path root_;
};

}  // namespace

// ---------------------------------------------------------------------------

TEST_F(CliTest, ParsesSectionsAndDefaults) {
    const ScenarioConfig c = parse_config(
        "[run]\nscenario = iswap\noutput_dir = results\nseed = 42\n\n[params]\nN = 50\n");
    EXPECT_EQ(c.scenario, "iswap");
    EXPECT_EQ(c.output_dir, fs::path("results"));
    EXPECT_EQ(c.seed, 42u);
    const auto resolved = resolved_params(c);
    ASSERT_FALSE(resolved.empty());
    EXPECT_EQ(resolved.front(), (std::pair<std::string, std::string>{"N", "50"}));
    bool saw_default = false;
    for (const auto& [k, v] : resolved) saw_default |= (k == "omega_sigma_n" && v == "1.884e6");
    EXPECT_TRUE(saw_default);
}

TEST_F(CliTest, EmptyParamsSectionIsAllowed) {
    EXPECT_NO_THROW(parse_config("[run]\nscenario = blockade\n[params]\n"));
    EXPECT_NO_THROW(parse_config("[run]\nscenario = blockade\n"));
}

TEST_F(CliTest, StrictParsingRejectsTyposAndBadValues) {
    const std::vector<std::string> bad = {
        "[run]\nscenario = iswap\n[params]\nNN = 5\n",
        "[run]\nscenario = iswap\nsed = 4\n",
        "[run]\nscenario = iswap\n[extra]\na = 1\n",
        "scenario = iswap\n",
        "[run]\nscenario = nope\n",
        "[params]\nN = 5\n",
        "[run]\nscenario = iswap\n[params]\nN = abc\n",
        "[run]\nscenario = iswap\n[params]\nN = 2.5\n",
        "[run]\nscenario = iswap\n[params]\nomega_sigma_n = 1e6x\n",
        "[run]\nscenario = iswap\nseed = -3\n",
        "[run]\nscenario = cde-solve\n[params]\ntuples = 0,0;1,1,1\n",
        "[run]\nscenario = oracle-validate\n[params]\ninclude_pi = maybe\n",
        "[run]\nscenario = iswap\n[params]\nN = 5\nN = 6\n",
    };
    for (const std::string& text : bad) {
        EXPECT_THROW(parse_config(text), ConfigError) << text;
    }
}

TEST_F(CliTest, ScenarioListMatchesSchema) {
    const std::vector<std::string> expected = {"qeff-curve", "qeff-spectral-surface",
                                               "storage-echo", "self-mode", "iswap", "cde-solve",
                                               "sqrt-iswap", "blockade", "oracle-validate"};
    EXPECT_EQ(scenario_names(), expected);
    EXPECT_THROW(summary_columns("nope"), ConfigError);
}

TEST_F(CliTest, QeffCurveMaximumIsUnityAtMatching) {
    const RunOutcome o = run(config("qeff-curve", {{"gamma2", "0"}}));
    EXPECT_EQ(o.exit_code, kExitOk);
    const Csv c = read_csv(root_ / "out" / "qeff_curve.csv");
    ASSERT_EQ(c.rows.size(), 401u);
    std::size_t best = 0;
    for (std::size_t i = 0; i < c.rows.size(); ++i) {
        if (c.rows[i][c.col("qeff")] > c.rows[best][c.col("qeff")]) best = i;
    }
    EXPECT_EQ(c.rows[best][c.col("qeff")], 1.0);
    EXPECT_EQ(c.rows[best][c.col("gamma_ratio")], 1.0);
    EXPECT_EQ(c.rows.front()[c.col("qeff")], 0.0);
}

TEST_F(CliTest, CsvDialect) {
    run(config("qeff-curve", {{"points", "11"}}));
    const std::string text = slurp(root_ / "out" / "qeff_curve.csv");
    EXPECT_EQ(text.find('\r'), std::string::npos);
    EXPECT_EQ(text.back(), '\n');
    const Csv c = read_csv(root_ / "out" / "qeff_curve.csv");
    EXPECT_FALSE(c.comments.empty());
    for (const std::string& line : c.comments) EXPECT_EQ(line.rfind("# ", 0), 0u);
    // Every column is cited by some comment line.
    for (const std::string& col : c.columns) {
        bool cited = false;
        for (const std::string& line : c.comments) cited |= line.find(col) != std::string::npos;
        EXPECT_TRUE(cited) << col;
    }
}

TEST_F(CliTest, CdeSolveTableHasThreeRows) {
    const RunOutcome o = run(config("cde-solve", {}));
    EXPECT_EQ(o.exit_code, kExitOk);
    const Csv c = read_csv(root_ / "out" / "cde_solutions.csv");
    ASSERT_EQ(c.rows.size(), 3u);
    const double expected_large[] = {2 * std::sqrt(3.0), 2 * std::sqrt(7.0) / 3,
                                     2 * std::sqrt(11.0) / 5};
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& r = c.rows[i];
        EXPECT_EQ(r[c.col("N")], 50.0);
        EXPECT_LE(r[c.col("residual_psi5")], 1e-10);
        EXPECT_NEAR(r[c.col("large_n_ratio")], expected_large[i], 1e-14);
        EXPECT_NEAR(r[c.col("published_ratio")], 2 * expected_large[i], 1e-14);
        EXPECT_NEAR(r[c.col("discrepancy_factor")], 2.0, 1e-14);
        EXPECT_NEAR(r[c.col("ratio")], expected_large[i], 0.05 * expected_large[i]);
    }
}

TEST_F(CliTest, InfeasibleTupleWritesStructuredError) {
    const RunOutcome o = run(config("cde-solve", {{"tuples", "0,0,1;5,1,1"}}));
    EXPECT_EQ(o.exit_code, kExitUsage);
    const auto err = nlohmann::json::parse(slurp(root_ / "out" / "error.json"));
    EXPECT_EQ(err["error"], "infeasible_conditions");
    EXPECT_EQ(err["n"], 5);
    EXPECT_GT(err["deficit"].get<double>(), 0.0);
    EXPECT_FALSE(fs::exists(root_ / "out" / "cde_solutions.csv"));
    const auto manifest = nlohmann::json::parse(slurp(root_ / "out" / "manifest.json"));
    EXPECT_EQ(manifest["exit_code"], kExitUsage);
}

TEST_F(CliTest, IswapReportsGateTime) {
    const RunOutcome o = run(config("iswap", {{"omega_sigma_n", "1.884e6"}}));
    EXPECT_EQ(o.exit_code, kExitOk);
    const auto report = nlohmann::json::parse(slurp(root_ / "out" / "report.json"));
    const double t = report["results"]["t_gate_s"];
    EXPECT_NEAR(t, std::numbers::pi / (2 * 1.884e6), 1e-20);
    EXPECT_EQ(report["results"]["t_gate_3sf"], "8.34e-07");
    const Csv c = read_csv(root_ / "out" / "iswap_pairs.csv");
    EXPECT_EQ(c.rows.size(), 100u);
}

TEST_F(CliTest, ManifestEchoesResolvedConfig) {
    ScenarioConfig c = config("self-mode", {{"t_k", "4"}});
    c.seed = 9;
    run(c);
    const auto m = nlohmann::json::parse(slurp(root_ / "out" / "manifest.json"));
    EXPECT_EQ(m["tool"], "cqedsim");
    EXPECT_EQ(m["version"], version());
    EXPECT_EQ(m["seed"], 9);
    EXPECT_EQ(m["config"]["t_k"], "4");
    EXPECT_EQ(m["config"]["Gamma"], "1");
    EXPECT_TRUE(m.contains("created_utc"));
    EXPECT_TRUE(m.contains("units"));
    EXPECT_EQ(m["outputs"].size(), 2u);
}

TEST_F(CliTest, SiConversionFactorsInManifest) {
    run(config("blockade", {{"samples", "50"}}));
    const auto m = nlohmann::json::parse(slurp(root_ / "out" / "manifest.json"));
    EXPECT_NEAR(m["units"]["time_unit_s"].get<double>(), 100 / 1.884e6, 1e-18);
    const Csv c = read_csv(root_ / "out" / "blockade.csv");
    ASSERT_EQ(c.rows.size(), 51u);
    double total = 0.0;
    for (const char* k : {"pop_psi1", "pop_psi2", "pop_psi3", "pop_psi4", "pop_psi5"}) {
        total += c.rows.back()[c.col(k)];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST_F(CliTest, AssertionFailureExitsOne) {
    const RunOutcome o = run(config("iswap", {{"N", "10"}, {"pairs", "20"}, {"min_fidelity", "0.9999"}}));
    EXPECT_EQ(o.exit_code, kExitAssertion);
    bool failed = false;
    for (const Assertion& a : o.assertions) failed |= !a.passed;
    EXPECT_TRUE(failed);
}

TEST_F(CliTest, LibraryPreconditionIsConfigError) {
    EXPECT_THROW(run(config("self-mode", {{"n_g2", "0.1"}, {"Gamma", "2"}})), ConfigError);
    EXPECT_THROW(run(config("qeff-curve", {{"points", "1"}})), ConfigError);
    EXPECT_THROW(run(config("oracle-validate", {{"N_values", "9"}})), ConfigError);
}

TEST_F(CliTest, SweepOverNFidelityNondecreasing) {
    const RunOutcome o = sweep(config("iswap", {{"pairs", "30"}}), "N", {"10", "100", "1000"});
    EXPECT_EQ(o.exit_code, kExitOk);
    const Csv c = read_csv(root_ / "out" / "sweep_N.csv");
    ASSERT_EQ(c.rows.size(), 3u);
    EXPECT_EQ(c.columns.front(), "N");
    for (std::size_t i = 1; i < 3; ++i) {
        EXPECT_GE(c.rows[i][c.col("min_fidelity")], c.rows[i - 1][c.col("min_fidelity")]);
        EXPECT_GE(c.rows[i][c.col("mean_fidelity")], c.rows[i - 1][c.col("mean_fidelity")]);
    }
}

TEST_F(CliTest, SweepRowsFollowInputOrder) {
    const std::vector<std::string> values = {"1000", "3", "250", "10", "40", "7", "600", "2"};
    sweep(config("iswap", {{"pairs", "5"}}), "N", values);
    const Csv c = read_csv(root_ / "out" / "sweep_N.csv");
    ASSERT_EQ(c.rows.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        EXPECT_EQ(c.rows[i][0], std::stod(values[i]));
    }
}

TEST_F(CliTest, SpectralSweepNonIncreasing) {
    std::vector<std::string> values;
    for (int i = 0; i <= 10; ++i) values.push_back(std::to_string(0.2 * i * 3.768e7));
    sweep(config("qeff-spectral-surface", {{"gamma_points", "1"}, {"dw_points", "1"}}),
          "delta_omega", values);
    const Csv c = read_csv(root_ / "out" / "sweep_delta_omega.csv");
    ASSERT_EQ(c.rows.size(), values.size());
    for (std::size_t i = 1; i < c.rows.size(); ++i) {
        EXPECT_LE(c.rows[i][c.col("efficiency")], c.rows[i - 1][c.col("efficiency")] + 1e-12);
    }
    EXPECT_EQ(c.rows.front()[c.col("efficiency")], 1.0);
}

TEST_F(CliTest, EmptySweepWritesHeaderOnly) {
    const RunOutcome o = sweep(config("qeff-spectral-surface", {}), "delta_omega", {});
    EXPECT_EQ(o.exit_code, kExitOk);
    const Csv c = read_csv(root_ / "out" / "sweep_delta_omega.csv");
    EXPECT_TRUE(c.rows.empty());
    EXPECT_EQ(c.columns, (std::vector<std::string>{"delta_omega", "efficiency", "point_efficiency"}));
}

TEST_F(CliTest, SweepAxisMustBeNumericParameter) {
    EXPECT_THROW(sweep(config("cde-solve", {}), "tuples", {"0,0,1"}), ConfigError);
    EXPECT_THROW(sweep(config("oracle-validate", {}), "include_pi", {"true"}), ConfigError);
    EXPECT_THROW(sweep(config("iswap", {}), "M", {"1"}), ConfigError);
    EXPECT_THROW(sweep(config("iswap", {}), "N", {"10", "ten"}), ConfigError);
}

TEST_F(CliTest, SweepPropagatesStructuredError) {
    const RunOutcome o = sweep(config("cde-solve", {{"tuples", "0,0,1"}}), "N", {"50", "1"});
    EXPECT_EQ(o.exit_code, kExitOk);  // N = 1 is feasible for any tuple
    const RunOutcome bad =
        sweep(config("sqrt-iswap", {{"n", "5"}, {"mu", "1"}, {"k", "1"}}), "N", {"2", "50"});
    EXPECT_EQ(bad.exit_code, kExitUsage);
    const auto err = nlohmann::json::parse(slurp(root_ / "out" / "error.json"));
    EXPECT_EQ(err["error"], "infeasible_conditions");
    EXPECT_EQ(err["sweep_value"], "2");
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
    for (const char* scenario : {"iswap", "sqrt-iswap", "cde-solve", "oracle-validate"}) {
        ScenarioConfig a = config(scenario, {}, "a");
        ScenarioConfig b = config(scenario, {}, "b");
        a.seed = b.seed = 77;
        const RunOutcome oa = run(a);
        const RunOutcome ob = run(b);
        ASSERT_EQ(oa.files.size(), ob.files.size());
        for (std::size_t i = 0; i < oa.files.size(); ++i) {
            if (oa.files[i].extension() != ".csv") continue;
            EXPECT_EQ(slurp(oa.files[i]), slurp(ob.files[i])) << scenario << " " << oa.files[i];
        }
        EXPECT_EQ(slurp(root_ / "a" / "report.json"), slurp(root_ / "b" / "report.json"));
    }
}

TEST_F(CliTest, SeedChangesRandomPairs) {
    ScenarioConfig a = config("iswap", {{"pairs", "4"}}, "a");
    ScenarioConfig b = config("iswap", {{"pairs", "4"}}, "b");
    a.seed = 1;
    b.seed = 2;
    run(a);
    run(b);
    EXPECT_NE(csv_body(root_ / "a" / "iswap_pairs.csv"), csv_body(root_ / "b" / "iswap_pairs.csv"));
}

TEST_F(CliTest, ConcurrentSweepMatchesSequentialRuns) {
    const std::vector<std::string> values = {"10", "20", "40", "80"};
    sweep(config("cde-solve", {}), "N", values);
    const Csv swept = read_csv(root_ / "out" / "sweep_N.csv");
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::string sub = "single" + values[i];
        run(config("cde-solve", {{"N", values[i]}}, sub));
        const auto report = nlohmann::json::parse(slurp(root_ / sub / "report.json"));
        EXPECT_EQ(swept.rows[i][swept.col("ratio")], report["summary"]["ratio"].get<double>());
    }
}

TEST_F(CliTest, EnvironmentOverridesOutputDir) {
    const fs::path target = root_ / "env_target";
    ::setenv("CQED_OUTPUT_DIR", target.c_str(), 1);
    const ScenarioConfig c = config("qeff-curve", {{"points", "5"}});
    EXPECT_EQ(effective_output_dir(c), target);
    run(c);
    EXPECT_TRUE(fs::exists(target / "qeff_curve.csv"));
    EXPECT_FALSE(fs::exists(root_ / "out" / "qeff_curve.csv"));
}

TEST_F(CliTest, StorageEchoFromCsvInput) {
    // Gaussian written as SI samples; the run must convert back to the same pulse.
    const double unit = 1e6, sigma = 15.0, t0 = 100.0, dt = 0.1;
    std::ofstream csv(root_ / "pulse.csv");
    csv << std::setprecision(17) << "t_s,re,im\n";
    for (int i = 0; i <= 2000; ++i) {
        const double t = i * dt;
        csv << (t / unit) << "," << std::exp(-(t - t0) * (t - t0) / (2 * sigma * sigma)) * std::sqrt(unit)
            << ",0\n";
    }
    csv.close();
    const RunOutcome o = run(config("storage-echo", {{"gamma1", "2e6"},
                                                      {"Gamma", "2e6"},
                                                      {"Delta_in", "1e6"},
                                                      {"n_spins", "300"},
                                                      {"input_csv", (root_ / "pulse.csv").string()}}));
    EXPECT_EQ(o.exit_code, kExitOk);
    const auto report = nlohmann::json::parse(slurp(root_ / "out" / "report.json"));
    EXPECT_LT(report["results"]["storage"]["balance_error"].get<double>(), 1e-6);
    EXPECT_NEAR(report["results"]["echo"]["peak_time_s"].get<double>(), (2 * 200.0 - t0) / unit,
                2 * dt / unit);
    const Csv trace = read_csv(root_ / "out" / "storage_trace.csv");
    EXPECT_EQ(trace.rows.size(), 2001u);
}

TEST_F(CliTest, StorageEchoRejectsMissingCsv) {
    EXPECT_THROW(run(config("storage-echo", {{"input_csv", (root_ / "none.csv").string()}})),
                 ConfigError);
}

TEST_F(CliTest, MainEntryExitCodes) {
    const fs::path good = write_ini(
        "good.ini", "[run]\nscenario = qeff-curve\noutput_dir = " + (root_ / "m").string() +
                        "\n[params]\npoints = 5\n");
    const fs::path typo = write_ini("typo.ini", "[run]\nscenario = qeff-curve\n[params]\npoint = 5\n");
    const fs::path fails = write_ini(
        "fails.ini", "[run]\nscenario = iswap\noutput_dir = " + (root_ / "f").string() +
                         "\n[params]\nN = 10\npairs = 5\nmin_fidelity = 0.99999\n");
    EXPECT_EQ(invoke({"run", "--config", good.string()}), kExitOk);
    EXPECT_EQ(invoke({"run", "--config", typo.string()}), kExitUsage);
    EXPECT_EQ(invoke({"run", "--config", fails.string()}), kExitAssertion);
    EXPECT_EQ(invoke({"run", "--config", (root_ / "missing.ini").string()}), kExitUsage);
    EXPECT_EQ(invoke({"run"}), kExitUsage);
    EXPECT_EQ(invoke({}), kExitUsage);
    EXPECT_EQ(invoke({"frobnicate"}), kExitUsage);
    EXPECT_EQ(invoke({"sweep", "--config", good.string(), "--axis", "points", "--values", ""}),
              kExitOk);
    EXPECT_EQ(invoke({"sweep", "--config", good.string(), "--axis", "points"}), kExitUsage);
    EXPECT_EQ(invoke({"--version"}), kExitOk);
}
