#include "scenarios.hpp"

#include "cqed/memory.hpp"
#include "cqed/oracle.hpp"
#include "cqed/processor.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace cqed::cli::detail {

namespace {

constexpr double kPi = std::numbers::pi;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

bool parse_real(const std::string& raw, double& out) {
    const std::string s = trim(raw);
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_integer(const std::string& raw, long long& out) {
    const std::string s = trim(raw);
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_bool(const std::string& raw, bool& out) {
    const std::string s = trim(raw);
    if (s == "true" || s == "1" || s == "yes") return out = true, true;
    if (s == "false" || s == "0" || s == "no") return out = false, true;
    return false;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
    throw ConfigError(fmt::format("parameter '{}': expected {}, got '{}'", key, want, value));
}

[[noreturn]] void bad_param(const std::string& key, const std::string& why) {
    throw ConfigError(fmt::format("parameter '{}': {}", key, why));
}

int as_int(const Params& p, const std::string& key, long long lo, long long hi) {
    const long long v = p.integer(key);
    if (v < lo || v > hi) bad_param(key, fmt::format("must lie in [{}, {}]", lo, hi));
    return static_cast<int>(v);
}

double positive(const Params& p, const std::string& key) {
    const double v = p.real(key);
    if (!(v > 0.0)) bad_param(key, "must be positive");
    return v;
}

double nonnegative(const Params& p, const std::string& key) {
    const double v = p.real(key);
    if (v < 0.0) bad_param(key, "must be nonnegative");
    return v;
}

// Uniform draw in [0, 1) that does not depend on the standard library's
// distribution implementations.
double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1p-53; }

struct BlochAngles {
    double theta2, phi2, theta3, phi3;
};

BlochAngles random_angles(std::mt19937_64& rng) {
    BlochAngles a{};
    a.theta2 = std::acos(1.0 - 2.0 * unit_draw(rng));
    a.phi2 = 2.0 * kPi * unit_draw(rng);
    a.theta3 = std::acos(1.0 - 2.0 * unit_draw(rng));
    a.phi3 = 2.0 * kPi * unit_draw(rng);
    return a;
}

processor::QubitPair pair_of(const BlochAngles& a) {
    return processor::QubitPair::from_bloch(a.theta2, a.phi2, a.theta3, a.phi3);
}

Assertion check(std::string name, bool ok, std::string detail) {
    return Assertion{std::move(name), ok, std::move(detail)};
}

double fidelity_floor(int N) { return 1.0 - 10.0 / N; }

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2) return std::nan("");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0 ? sxy / sxx : std::nan("");
}

// ---------------------------------------------------------------------------

ScenarioResult qeff_curve(const Params& p, std::uint64_t) {
    memory::MemoryCircuitParams mp;
    mp.gamma1 = positive(p, "gamma1");
    mp.gamma2 = nonnegative(p, "gamma2");
    mp.Delta_in = positive(p, "Delta_in");
    const double lo = nonnegative(p, "ratio_min");
    const double hi = p.real("ratio_max");
    const int points = as_int(p, "points", 2, 1000000);
    if (!(hi > lo)) bad_param("ratio_max", "must exceed ratio_min");

    ScenarioResult r;
    Table t{"qeff_curve.csv",
            {"gamma_ratio: Gamma / gamma1",
             "Gamma_rad_s: ensemble-cavity rate",
             "qeff: memory::qeff_point",
             "qeff_reduced: memory::qeff_point_reduced"},
            {"gamma_ratio", "Gamma_rad_s", "qeff", "qeff_reduced"},
            {}};
    double best = -1.0, best_ratio = 0.0, worst_rel = 0.0;
    for (int i = 0; i < points; ++i) {
        const double ratio = lo + (hi - lo) * i / (points - 1);
        mp.Gamma = ratio * mp.gamma1;
        const double q = memory::qeff_point(mp);
        const double qr = memory::qeff_point_reduced(mp);
        worst_rel = std::max(worst_rel, std::abs(q - qr) / std::max(1.0, std::abs(qr)));
        if (q > best) best = q, best_ratio = ratio;
        t.rows.push_back({ratio, mp.Gamma, q, qr});
    }
    r.tables.push_back(std::move(t));
    r.summary = {best, best_ratio};
    r.report["max_qeff"] = best;
    r.report["argmax_gamma_ratio"] = best_ratio;
    r.assertions.push_back(check("reduced_form_identity", worst_rel <= 1e-12,
                                 fmt::format("max relative difference {:.3e}", worst_rel)));
    r.units["rates"] = "rad/s";
    return r;
}

ScenarioResult qeff_spectral_surface(const Params& p, std::uint64_t) {
    memory::MemoryCircuitParams mp;
    mp.gamma1 = positive(p, "gamma1");
    mp.gamma2 = nonnegative(p, "gamma2");
    mp.Gamma = nonnegative(p, "Gamma");
    mp.Delta_in = positive(p, "Delta_in");
    const double dw = nonnegative(p, "delta_omega");
    const double g_lo = positive(p, "gamma_ratio_min");
    const double g_hi = p.real("gamma_ratio_max");
    const int g_points = as_int(p, "gamma_points", 1, 10000);
    const double dw_hi = nonnegative(p, "dw_ratio_max");
    const int dw_points = as_int(p, "dw_points", 1, 10000);
    if (g_hi < g_lo) bad_param("gamma_ratio_max", "must not be below gamma_ratio_min");

    ScenarioResult r;
    Table t{"qeff_spectral_surface.csv",
            {"gamma_ratio: Gamma / gamma1",
             "dw_ratio: input spectral FWHM / Delta_in",
             "qeff: memory::qeff_spectral"},
            {"gamma_ratio", "dw_ratio", "qeff"},
            {}};
    memory::MemoryCircuitParams grid = mp;
    double anchor_err = 0.0;
    for (int i = 0; i < g_points; ++i) {
        const double gr = g_points == 1 ? g_lo : g_lo + (g_hi - g_lo) * i / (g_points - 1);
        grid.Gamma = gr * mp.gamma1;
        for (int j = 0; j < dw_points; ++j) {
            const double wr = dw_points == 1 ? 0.0 : dw_hi * j / (dw_points - 1);
            const double q = memory::qeff_spectral(grid, wr * mp.Delta_in);
            if (j == 0 && wr == 0.0) {
                anchor_err = std::max(anchor_err, std::abs(q - memory::qeff_point(grid)));
            }
            t.rows.push_back({gr, wr, q});
        }
    }
    r.tables.push_back(std::move(t));
    const double eff = memory::qeff_spectral(mp, dw);
    r.summary = {eff, memory::qeff_point(mp)};
    r.report["delta_omega_rad_s"] = dw;
    r.report["dw_ratio"] = dw / mp.Delta_in;
    r.report["efficiency"] = eff;
    r.report["point_efficiency"] = memory::qeff_point(mp);
    r.assertions.push_back(check("zero_bandwidth_anchor", anchor_err <= 1e-9,
                                 fmt::format("max |qeff_spectral(0) - qeff_point| {:.3e}",
                                             anchor_err)));
    r.units["rates"] = "rad/s";
    return r;
}

memory::FieldEnvelope read_envelope_csv(const std::string& path, double time_scale,
                                        double amp_scale) {
    std::ifstream in(path);
    if (!in) throw ConfigError("input_csv: cannot open '" + path + "'");
    memory::FieldEnvelope f;
    std::string line;
    while (std::getline(in, line)) {
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        const std::vector<std::string> cells = split(s, ',');
        double v[3] = {0, 0, 0};
        bool numeric = cells.size() == 2 || cells.size() == 3;
        for (std::size_t j = 0; numeric && j < cells.size(); ++j) numeric = parse_real(cells[j], v[j]);
        if (!numeric) {
            if (f.t.empty()) continue;  // column header
            throw ConfigError("input_csv: malformed row '" + s + "'");
        }
        f.t.push_back(v[0] * time_scale);
        f.samples.emplace_back(v[1] * amp_scale, v[2] * amp_scale);
    }
    try {
        f.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("input_csv: ") + e.what());
    }
    return f;
}

ScenarioResult storage_echo(const Params& p, std::uint64_t) {
    // Internal time unit is 1 / Delta_in.
    const double unit = positive(p, "Delta_in");
    memory::MemoryCircuitParams mp;
    mp.Delta_in = 1.0;
    mp.gamma1 = positive(p, "gamma1") / unit;
    mp.gamma2 = nonnegative(p, "gamma2") / unit;
    mp.Gamma = nonnegative(p, "Gamma") / unit;
    const int n_spins = as_int(p, "n_spins", 1, 200000);
    const double truncation = positive(p, "truncation");
    const double min_eff = nonnegative(p, "min_efficiency");
    const double max_mirror = nonnegative(p, "max_mirror_rms");

    memory::FieldEnvelope input;
    double t0 = std::nan("");
    const std::string& csv = p.text("input_csv");
    if (!csv.empty()) {
        input = read_envelope_csv(csv, unit, 1.0 / std::sqrt(unit));
    } else {
        const double fwhm = positive(p, "pulse_fwhm_ratio");
        const double dt = positive(p, "dt_ratio");
        const double window = positive(p, "window_sigmas") * memory::gaussian_sigma_for_fwhm(fwhm);
        t0 = 0.5 * window;
        input = memory::gaussian_pulse(memory::uniform_grid(0.0, window, dt), t0, fwhm, 1.0,
                                       p.real("carrier_offset_ratio"));
    }
    const double flip = p.real("flip_time_ratio");
    const double t_prime = flip > 0.0 ? flip : input.t.back();

    const memory::SpinEnsembleDiscretization ens =
        memory::lorentzian_ensemble(static_cast<std::size_t>(n_spins), mp, truncation);
    const memory::StorageTrace tr = memory::simulate_storage(ens, mp, input);
    const memory::EchoResult echo = memory::echo_retrieve(tr, ens, mp, t_prime);

    ScenarioResult r;
    r.warnings = tr.warnings;
    const double amp = std::sqrt(unit);
    Table trace{"storage_trace.csv",
                {"t_s: time",
                 "cavity_re, cavity_im: memory::simulate_storage cavity amplitude",
                 "out_power: |E_out|^2 in photons/s, E_out = sqrt(gamma1) a - E_in",
                 "reflected_cum, lost_cum: cumulative fractions of input energy"},
                {"t_s", "cavity_re", "cavity_im", "out_power", "reflected_cum", "lost_cum"},
                {}};
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
        trace.rows.push_back({tr.t[i] / unit, tr.cavity_amp[i].real(), tr.cavity_amp[i].imag(),
                              std::norm(tr.out_field.samples[i] * amp), tr.reflected_cumulative[i],
                              tr.lost_cumulative[i]});
    }
    Table out{"echo.csv",
              {"t_s: time after the detuning flip",
               "echo_re, echo_im: memory::echo_retrieve field in sqrt(photons/s)",
               "echo_power: |E_echo|^2 in photons/s"},
              {"t_s", "echo_re", "echo_im", "echo_power"},
              {}};
    for (std::size_t i = 0; i < echo.echo.size(); ++i) {
        const cd e = echo.echo.samples[i] * amp;
        out.rows.push_back({echo.echo.t[i] / unit, e.real(), e.imag(), std::norm(e)});
    }
    r.tables.push_back(std::move(trace));
    r.tables.push_back(std::move(out));

    r.summary = {tr.absorbed_fraction, tr.reflected_fraction, tr.lost_fraction, echo.efficiency,
                 echo.peak_time / unit, echo.mirror_rms};
    r.report["storage"] = {{"absorbed_fraction", tr.absorbed_fraction},
                           {"spin_fraction", tr.spin_fraction},
                           {"reflected_fraction", tr.reflected_fraction},
                           {"lost_fraction", tr.lost_fraction},
                           {"balance_error", tr.balance_error()},
                           {"degenerate_input", tr.degenerate_input}};
    r.report["echo"] = {{"efficiency", echo.efficiency},
                        {"pre_flip_fraction", echo.pre_flip_fraction},
                        {"peak_time_s", echo.peak_time / unit},
                        {"centroid_time_s", echo.centroid_time / unit},
                        {"mirror_rms", echo.mirror_rms},
                        {"flip_time_s", t_prime / unit}};
    r.report["n_spins"] = n_spins;

    if (!tr.degenerate_input) {
        r.assertions.push_back(check("energy_balance", tr.balance_error() <= 1e-6,
                                     fmt::format("balance error {:.3e}", tr.balance_error())));
    }
    if (std::isfinite(t0)) {
        const double expected = 2.0 * t_prime - t0;
        const double dt = input.dt();
        r.report["echo"]["expected_peak_s"] = expected / unit;
        r.assertions.push_back(
            check("echo_peak_time", std::abs(echo.peak_time - expected) <= dt,
                  fmt::format("peak {:.6g} s, expected {:.6g} s, step {:.3g} s", echo.peak_time / unit,
                              expected / unit, dt / unit)));
    }
    if (min_eff > 0.0) {
        r.assertions.push_back(check("retrieval_efficiency", echo.efficiency >= min_eff,
                                     fmt::format("{:.6f} >= {}", echo.efficiency, min_eff)));
    }
    if (max_mirror > 0.0) {
        r.assertions.push_back(check("spectrum_inversion", echo.mirror_rms <= max_mirror,
                                     fmt::format("mirror rms {:.4e} <= {}", echo.mirror_rms,
                                                 max_mirror)));
    }
    r.units["time_unit_s"] = 1.0 / unit;
    r.units["field_scale_sqrt_per_s"] = amp;
    return r;
}

ScenarioResult self_mode(const Params& p, std::uint64_t) {
    const double t_k = p.real("t_k");
    const std::vector<double> grid =
        memory::uniform_grid(p.real("t_start"), p.real("t_end"), positive(p, "dt"));
    memory::SelfMode m;
    try {
        m = memory::self_mode(p.real("n_g2"), p.real("Gamma"), t_k, p.real("e_o"), grid);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    ScenarioResult r;
    Table t{"self_mode.csv",
            {"t: time in the caller's unit",
             "field: memory::self_mode envelope",
             "in_domain: 1 before the emission time 2 t_k"},
            {"t", "field", "in_domain"},
            {}};
    double peak = 0.0;
    for (std::size_t i = 0; i < m.envelope.size(); ++i) {
        const double e = m.envelope.samples[i].real();
        peak = std::max(peak, std::abs(e));
        t.rows.push_back({m.envelope.t[i], e, i < m.domain_end ? 1.0 : 0.0});
    }
    r.tables.push_back(std::move(t));
    r.summary = {m.S, peak};
    r.report["S"] = m.S;
    r.report["peak_abs_field"] = peak;
    r.report["emission_time"] = 2.0 * t_k;
    if (m.domain_end < m.envelope.size() &&
        std::abs(m.envelope.t[m.domain_end] - 2.0 * t_k) <= 1e-12 * std::max(1.0, t_k)) {
        const double at = std::abs(m.envelope.samples[m.domain_end]);
        r.assertions.push_back(check("node_at_emission_time", at <= 1e-12 * std::max(1.0, peak),
                                     fmt::format("|E(2 t_k)| = {:.3e}", at)));
    }
    r.units["time"] = "caller's unit; no conversion";
    return r;
}

ScenarioResult iswap(const Params& p, std::uint64_t seed) {
    const int N = as_int(p, "N", 1, 100000000);
    const double rate = positive(p, "omega_sigma_n");
    const int pairs = as_int(p, "pairs", 0, 1000000);
    double floor = p.real("min_fidelity");
    if (floor < 0.0) floor = fidelity_floor(N);

    // Internal unit: 1 / Omega_sigma.
    const double time_unit = N / rate;
    const double t_gate = processor::iswap_time(N, 1.0);
    std::mt19937_64 rng(seed);

    ScenarioResult r;
    Table t{"iswap_pairs.csv",
            {"theta/phi: Bloch angles of the random input qubits",
             "fidelity: processor::iswap overlap with processor::iswap_target",
             "global_phase, amplitude_error: processor::iswap phase alignment"},
            {"pair", "theta2", "phi2", "theta3", "phi3", "fidelity", "infidelity", "global_phase",
             "amplitude_error"},
            {}};
    double min_f = 1.0, sum_f = 0.0, max_amp = 0.0;
    for (int i = 0; i < pairs; ++i) {
        const BlochAngles a = random_angles(rng);
        const processor::IswapResult g = processor::iswap(pair_of(a), N, 1.0);
        min_f = std::min(min_f, g.fidelity);
        sum_f += g.fidelity;
        max_amp = std::max(max_amp, g.amplitude_error);
        t.rows.push_back({double(i), a.theta2, a.phi2, a.theta3, a.phi3, g.fidelity,
                          1.0 - g.fidelity, g.global_phase, g.amplitude_error});
    }
    const double mean_f = pairs > 0 ? sum_f / pairs : std::nan("");
    if (pairs == 0) min_f = std::nan("");
    r.tables.push_back(std::move(t));
    const double t_gate_s = t_gate * time_unit;
    r.summary = {t_gate_s, min_f, mean_f, max_amp};
    r.report["t_gate_s"] = t_gate_s;
    r.report["t_gate_3sf"] = fmt::format("{:.3g}", t_gate_s);
    r.report["min_fidelity"] = min_f;
    r.report["mean_fidelity"] = mean_f;
    r.report["fidelity_floor"] = floor;

    const double scaled = t_gate * N;
    r.assertions.push_back(check("gate_time_scaling", std::abs(scaled - kPi / 2) <= 1e-12,
                                 fmt::format("t N Omega_sigma = {:.17g}", scaled)));
    if (pairs > 0) {
        r.assertions.push_back(check("min_fidelity", min_f >= floor,
                                     fmt::format("{:.9f} >= {:.9f}", min_f, floor)));
    }
    r.units["time_unit_s"] = time_unit;
    r.units["omega_sigma_rad_s"] = rate / N;
    return r;
}

ScenarioResult cde_solve(const Params& p, std::uint64_t) {
    const int N = as_int(p, "N", 1, 100000000);
    const double rate = positive(p, "omega_sigma_n");
    const double omega_sigma = rate / N;
    const auto tuples = p.tuples("tuples");

    ScenarioResult r;
    Table t{"cde_solutions.csv",
            {"ratio, tau, residual_psi5: processor::cde_solve at finite N",
             "published_ratio: processor::cde_ratio_published",
             "discrepancy_factor: published_ratio / large_n_ratio",
             "large_n_ratio: processor::cde_ratio_large_n",
             "gate_time_s, omega_s_rad_s: GateConditionSolution in SI"},
            {"n", "mu", "k", "N", "ratio", "tau", "residual_psi5", "published_ratio",
             "discrepancy_factor", "large_n_ratio", "gate_time_s", "omega_s_rad_s"},
            {}};
    double worst_psi5 = 0.0, worst_time = 0.0, worst_rot = 0.0;
    ordered_json rows = ordered_json::array();
    for (const auto& [n, mu, k] : tuples) {
        processor::GateConditionSolution s;
        try {
            s = processor::cde_solve(n, mu, k, N);
        } catch (const processor::InfeasibleConditions& e) {
            throw StructuredError(ordered_json{{"error", "infeasible_conditions"},
                                               {"scenario", "cde-solve"},
                                               {"n", n},
                                               {"mu", mu},
                                               {"k", k},
                                               {"N", N},
                                               {"deficit", e.deficit()},
                                               {"message", e.what()}});
        } catch (const std::invalid_argument& e) {
            throw ConfigError(fmt::format("tuples ({},{},{}): {}", n, mu, k, e.what()));
        }
        const double large = processor::cde_ratio_large_n(n, mu, k);
        const double published = processor::cde_ratio_published(n, mu, k);
        worst_psi5 = std::max(worst_psi5, s.residual_psi5);
        worst_time = std::max(worst_time, s.residual_time);
        worst_rot = std::max(worst_rot, s.residual_rotation);
        t.rows.push_back({double(n), double(mu), double(k), double(N), s.ratio, s.tau,
                          s.residual_psi5, published, published / large, large,
                          s.gate_time(omega_sigma), s.omega_s(omega_sigma)});
        rows.push_back({{"n", n}, {"mu", mu}, {"k", k}, {"ratio", s.ratio},
                        {"large_n_ratio", large}, {"published_ratio", published},
                        {"gate_time_s", s.gate_time(omega_sigma)}});
    }
    const double first_ratio = t.rows.empty() ? std::nan("") : t.rows.front()[4];
    r.tables.push_back(std::move(t));
    r.summary = {first_ratio, worst_psi5};
    r.report["solutions"] = rows;
    r.assertions.push_back(check("psi5_eliminated", worst_psi5 <= 1e-10,
                                 fmt::format("max residual {:.3e}", worst_psi5)));
    r.assertions.push_back(check("time_condition", worst_time <= 1e-9,
                                 fmt::format("max residual {:.3e}", worst_time)));
    r.assertions.push_back(check("rotation_condition", worst_rot <= 1e-9,
                                 fmt::format("max residual {:.3e}", worst_rot)));
    r.units["time_unit_s"] = 1.0 / omega_sigma;
    r.units["omega_sigma_rad_s"] = omega_sigma;
    return r;
}

ScenarioResult sqrt_iswap(const Params& p, std::uint64_t seed) {
    const int N = as_int(p, "N", 1, 100000000);
    const double rate = positive(p, "omega_sigma_n");
    const int pairs = as_int(p, "pairs", 0, 1000000);
    const int n = as_int(p, "n", 0, 1000000), mu = as_int(p, "mu", 0, 1), k = as_int(p, "k", 1, 1000000);
    processor::GateConditionSolution s;
    try {
        s = processor::cde_solve(n, mu, k, N);
    } catch (const processor::InfeasibleConditions& e) {
        throw StructuredError(ordered_json{{"error", "infeasible_conditions"},
                                           {"scenario", "sqrt-iswap"},
                                           {"n", n},
                                           {"mu", mu},
                                           {"k", k},
                                           {"N", N},
                                           {"deficit", e.deficit()},
                                           {"message", e.what()}});
    }
    std::mt19937_64 rng(seed);
    ScenarioResult r;
    Table t{"sqrt_iswap_pairs.csv",
            {"fidelity_to_closed_form, psi5_population: processor::sqrt_iswap_cde",
             "entanglement: 2 |a1 a4 - a2 a3| of the output"},
            {"pair", "theta2", "phi2", "theta3", "phi3", "fidelity_to_closed_form",
             "psi5_population", "entanglement"},
            {}};
    double min_f = 1.0, max_p5 = 0.0;
    for (int i = 0; i < pairs; ++i) {
        const BlochAngles a = random_angles(rng);
        const processor::SqrtIswapResult g = processor::sqrt_iswap_cde(pair_of(a), s, N, 1.0);
        const auto& v = g.state.amps;
        min_f = std::min(min_f, g.fidelity_to_closed_form);
        max_p5 = std::max(max_p5, g.psi5_population);
        t.rows.push_back({double(i), a.theta2, a.phi2, a.theta3, a.phi3, g.fidelity_to_closed_form,
                          g.psi5_population, 2.0 * std::abs(v[0] * v[3] - v[1] * v[2])});
    }
    if (pairs == 0) min_f = std::nan("");
    r.tables.push_back(std::move(t));
    const double time_unit = N / rate;
    const double t_gate_s = s.tau / N * time_unit;
    r.summary = {t_gate_s, min_f, max_p5};
    r.report["t_gate_s"] = t_gate_s;
    r.report["ratio"] = s.ratio;
    r.report["omega_s_rad_s"] = s.omega_s(rate / N);
    if (pairs > 0) {
        r.assertions.push_back(check("psi5_eliminated", max_p5 <= 1e-10,
                                     fmt::format("max population {:.3e}", max_p5)));
        r.assertions.push_back(check("closed_form_fidelity", min_f >= fidelity_floor(N),
                                     fmt::format("{:.12f} >= {:.6f}", min_f, fidelity_floor(N))));
    }
    r.units["time_unit_s"] = time_unit;
    r.units["omega_sigma_rad_s"] = rate / N;
    return r;
}

ScenarioResult blockade(const Params& p, std::uint64_t) {
    const int N = as_int(p, "N", 2, 100000000);
    const double rate = positive(p, "omega_sigma_n");
    const double shift = p.real("shift_ratio");
    const double periods = positive(p, "periods");
    const int samples = as_int(p, "samples", 1, 10000000);
    const double max_p5 = positive(p, "max_psi5");

    processor::TwoNodeParams tp;
    tp.N = N;
    tp.Omega_sigma = 1.0;
    tp.Omega_pi = shift * N - 1.0;
    const double S = std::sqrt(4.0 * N * (N - 1.0) + tp.omega_s() * tp.omega_s());
    const double t_end = periods * 2.0 * kPi / S;
    const processor::QubitPair q = processor::QubitPair::from_bloch(
        p.real("theta2"), p.real("phi2"), p.real("theta3"), p.real("phi3"));
    const processor::BlockadeResult b =
        processor::blockade_evolution(q, tp, t_end, static_cast<std::size_t>(samples));

    const double time_unit = N / rate;
    ScenarioResult r;
    r.warnings = b.warnings;
    Table t{"blockade.csv",
            {"pop_psi1..pop_psi5: processor::evolve_exact under processor::h_eff_sigma_pi",
             "psi4_re, psi4_im: exact psi4 amplitude",
             "closed_psi4_re, closed_psi4_im: processor::blockade_closed_form"},
            {"t_s", "pop_psi1", "pop_psi2", "pop_psi3", "pop_psi4", "pop_psi5", "psi4_re",
             "psi4_im", "closed_psi4_re", "closed_psi4_im"},
            {}};
    const ComplexMatrix h = processor::h_eff_sigma_pi(tp);
    const processor::CollectiveState s0 = processor::embed_pair(q);
    for (int i = 0; i <= samples; ++i) {
        const double ti = t_end * i / samples;
        const processor::CollectiveState s = processor::evolve_exact(h, s0, ti);
        const processor::CollectiveState c = processor::blockade_closed_form(q, tp, ti);
        t.rows.push_back({ti * time_unit, std::norm(s.amps[0]), std::norm(s.amps[1]),
                          std::norm(s.amps[2]), std::norm(s.amps[3]), std::norm(s.amps[4]),
                          s.amps[3].real(), s.amps[3].imag(), c.amps[3].real(), c.amps[3].imag()});
    }
    r.tables.push_back(std::move(t));
    r.summary = {b.max_psi5_pop, b.transfer_bound, b.deviation};
    r.report["max_psi5_population"] = b.max_psi5_pop;
    r.report["transfer_bound"] = b.transfer_bound;
    r.report["deviation"] = b.deviation;
    r.report["in_blockade_regime"] = b.in_blockade_regime;
    r.report["duration_s"] = t_end * time_unit;
    r.assertions.push_back(check("psi5_suppressed", b.max_psi5_pop <= max_p5,
                                 fmt::format("{:.4e} <= {:.4e}", b.max_psi5_pop, max_p5)));
    r.assertions.push_back(check("closed_form_within_bound",
                                 b.deviation <= b.transfer_bound * (1.0 + 1e-9),
                                 fmt::format("deviation {:.4e}, bound {:.4e}", b.deviation,
                                             b.transfer_bound)));
    r.units["time_unit_s"] = time_unit;
    r.units["omega_sigma_rad_s"] = rate / N;
    return r;
}

ScenarioResult oracle_validate(const Params& p, std::uint64_t) {
    std::vector<int> sizes;
    for (double v : p.reals("N_values")) {
        if (v != std::floor(v) || v < 1 || v > oracle::kMaxAtomsPerNode) {
            bad_param("N_values", fmt::format("entries must be integers in [1, {}]",
                                              oracle::kMaxAtomsPerNode));
        }
        sizes.push_back(static_cast<int>(v));
    }
    const std::vector<double> ratios = p.reals("ratios");
    for (double v : ratios) {
        if (!(v > 0.0)) bad_param("ratios", "entries must be positive");
    }
    const bool with_pi = p.flag("include_pi");
    const double pi_ratio = p.real("pi_ratio");
    const double max_dist = nonnegative(p, "max_distance");
    const double max_leak = nonnegative(p, "max_leakage");
    const double slope_lo = p.real("slope_min"), slope_hi = p.real("slope_max");
    const processor::QubitPair q = processor::QubitPair::from_bloch(
        p.real("theta2"), p.real("phi2"), p.real("theta3"), p.real("phi3"));

    ScenarioResult r;
    Table t{"oracle_validation.csv",
            {"g_over_Delta: single-atom coupling / Delta",
             "dispersive_ratio: g sqrt(N) / Delta",
             "t: processor::iswap_time in units of 1 / Delta",
             "distance, leakage: oracle::validate_effective"},
            {"N", "g_over_Delta", "t", "distance", "leakage", "dispersive_ratio"},
            {}};
    double worst_d = 0.0, worst_l = 0.0;
    std::vector<double> lx, ly;
    for (int N : sizes) {
        for (double ratio : ratios) {
            oracle::FullModelParams fp;
            fp.N = N;
            fp.g_sigma = ratio / std::sqrt(double(N));
            fp.g_pi = with_pi ? pi_ratio * fp.g_sigma : 0.0;
            fp.include_pi = with_pi;
            const double omega_sigma = fp.g_sigma * fp.g_sigma / fp.Delta;
            const double ti = processor::iswap_time(N, omega_sigma);
            oracle::Validation v;
            try {
                v = oracle::validate_effective(fp, q, ti);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
            worst_d = std::max(worst_d, v.distance);
            worst_l = std::max(worst_l, v.leakage);
            if (N == sizes.front() && v.leakage > 0.0) {
                lx.push_back(std::log(fp.g_sigma));
                ly.push_back(std::log(v.leakage));
            }
            t.rows.push_back({double(N), fp.g_sigma, ti, v.distance, v.leakage, ratio});
        }
    }
    const double slope = least_squares_slope(lx, ly);
    r.tables.push_back(std::move(t));
    r.summary = {worst_d, worst_l, slope};
    r.report["max_distance"] = worst_d;
    r.report["max_leakage"] = worst_l;
    r.report["leakage_slope"] = std::isfinite(slope) ? ordered_json(slope) : ordered_json(nullptr);
    if (max_dist > 0.0) {
        r.assertions.push_back(check("distance", worst_d <= max_dist,
                                     fmt::format("{:.4e} <= {}", worst_d, max_dist)));
    }
    if (max_leak > 0.0) {
        r.assertions.push_back(check("leakage", worst_l <= max_leak,
                                     fmt::format("{:.4e} <= {}", worst_l, max_leak)));
    }
    if (slope_hi > slope_lo) {
        r.assertions.push_back(check("leakage_slope", slope >= slope_lo && slope <= slope_hi,
                                     fmt::format("{:.4f} in [{}, {}]", slope, slope_lo, slope_hi)));
    }
    r.units["time"] = "1 / Delta";
    return r;
}

const std::string kPiText = "3.141592653589793";
const std::string kHalfPiText = "1.5707963267948966";

std::vector<Scenario> build_registry() {
    using K = Kind;
    std::vector<Scenario> s;
    s.push_back({"qeff-curve",
                 {{"gamma1", K::Real, "3.768e7", "cavity-waveguide rate, rad/s"},
                  {"gamma2", K::Real, "0", "cavity loss rate, rad/s"},
                  {"Delta_in", K::Real, "1.884e7", "inhomogeneous width, rad/s"},
                  {"ratio_min", K::Real, "0", "lowest Gamma / gamma1"},
                  {"ratio_max", K::Real, "4", "highest Gamma / gamma1"},
                  {"points", K::Integer, "401", "grid points"}},
                 {"max_qeff", "argmax_gamma_ratio"},
                 qeff_curve});
    s.push_back({"qeff-spectral-surface",
                 {{"gamma1", K::Real, "3.768e7", "cavity-waveguide rate, rad/s"},
                  {"gamma2", K::Real, "0", "cavity loss rate, rad/s"},
                  {"Gamma", K::Real, "3.768e7", "ensemble-cavity rate, rad/s"},
                  {"Delta_in", K::Real, "3.768e7", "inhomogeneous width, rad/s"},
                  {"delta_omega", K::Real, "7.536e6", "input FWHM for the summary point, rad/s"},
                  {"gamma_ratio_min", K::Real, "0.25", ""},
                  {"gamma_ratio_max", K::Real, "4", ""},
                  {"gamma_points", K::Integer, "16", ""},
                  {"dw_ratio_max", K::Real, "2", "largest input FWHM / Delta_in"},
                  {"dw_points", K::Integer, "21", ""}},
                 {"efficiency", "point_efficiency"},
                 qeff_spectral_surface});
    s.push_back({"storage-echo",
                 {{"gamma1", K::Real, "3.768e7", "rad/s"},
                  {"gamma2", K::Real, "0", "rad/s"},
                  {"Gamma", K::Real, "3.768e7", "rad/s"},
                  {"Delta_in", K::Real, "1.884e7", "rad/s; also the internal inverse time unit"},
                  {"n_spins", K::Integer, "2000", ""},
                  {"truncation", K::Real, "20", "line truncation in units of Delta_in"},
                  {"pulse_fwhm_ratio", K::Real, "0.05", "input spectral FWHM / Delta_in"},
                  {"carrier_offset_ratio", K::Real, "0", "input carrier offset / Delta_in"},
                  {"dt_ratio", K::Real, "0.05", "grid step * Delta_in"},
                  {"window_sigmas", K::Real, "12", "storage window in pulse sigmas"},
                  {"flip_time_ratio", K::Real, "0", "flip time * Delta_in; 0 = window end"},
                  {"input_csv", K::Text, "", "t_s, Re, Im in sqrt(photons/s); replaces the pulse"},
                  {"min_efficiency", K::Real, "0", "asserted when positive"},
                  {"max_mirror_rms", K::Real, "0", "asserted when positive"}},
                 {"absorbed_fraction", "reflected_fraction", "lost_fraction", "echo_efficiency",
                  "echo_peak_s", "mirror_rms"},
                 storage_echo});
    s.push_back({"self-mode",
                 {{"n_g2", K::Real, "1", "N |g|^2"},
                  {"Gamma", K::Real, "1", ""},
                  {"t_k", K::Real, "5", ""},
                  {"e_o", K::Real, "1", ""},
                  {"t_start", K::Real, "0", ""},
                  {"t_end", K::Real, "20", ""},
                  {"dt", K::Real, "0.01", ""}},
                 {"S", "peak_abs_field"},
                 self_mode});
    s.push_back({"iswap",
                 {{"N", K::Integer, "100", "atoms per node"},
                  {"omega_sigma_n", K::Real, "1.884e6", "Omega_sigma N, rad/s"},
                  {"pairs", K::Integer, "100", "random input pairs"},
                  {"min_fidelity", K::Real, "-1", "negative: 1 - 10 / N"}},
                 {"t_gate_s", "min_fidelity", "mean_fidelity", "max_amplitude_error"},
                 iswap});
    s.push_back({"cde-solve",
                 {{"tuples", K::TupleList, "0,0,1;0,1,2;1,0,3", "n,mu,k triples"},
                  {"N", K::Integer, "50", "atoms per node"},
                  {"omega_sigma_n", K::Real, "1.884e6", "Omega_sigma N, rad/s"}},
                 {"ratio", "max_residual_psi5"},
                 cde_solve});
    s.push_back({"sqrt-iswap",
                 {{"n", K::Integer, "0", ""},
                  {"mu", K::Integer, "0", ""},
                  {"k", K::Integer, "1", ""},
                  {"N", K::Integer, "200", ""},
                  {"omega_sigma_n", K::Real, "1.884e6", "rad/s"},
                  {"pairs", K::Integer, "20", ""}},
                 {"t_gate_s", "min_fidelity", "max_psi5_population"},
                 sqrt_iswap});
    s.push_back({"blockade",
                 {{"N", K::Integer, "100", ""},
                  {"shift_ratio", K::Real, "-100", "Omega_s / (N Omega_sigma)"},
                  {"omega_sigma_n", K::Real, "1.884e6", "rad/s"},
                  {"periods", K::Real, "1", "duration in (psi4, psi5) rotation periods"},
                  {"samples", K::Integer, "2000", ""},
                  {"theta2", K::Real, kPiText, ""},
                  {"phi2", K::Real, "0", ""},
                  {"theta3", K::Real, kPiText, ""},
                  {"phi3", K::Real, "0", ""},
                  {"max_psi5", K::Real, "5e-4", ""}},
                 {"max_psi5_population", "transfer_bound", "deviation"},
                 blockade});
    s.push_back({"oracle-validate",
                 {{"N_values", K::RealList, "3", "atoms per node"},
                  {"ratios", K::RealList, "0.05,0.025,0.0125", "g sqrt(N) / Delta"},
                  {"include_pi", K::Bool, "false", ""},
                  {"pi_ratio", K::Real, "1", "g_pi / g_sigma"},
                  {"theta2", K::Real, kHalfPiText, ""},
                  {"phi2", K::Real, "0", ""},
                  {"theta3", K::Real, kHalfPiText, ""},
                  {"phi3", K::Real, "0", ""},
                  {"max_distance", K::Real, "0", "asserted when positive"},
                  {"max_leakage", K::Real, "0", "asserted when positive"},
                  {"slope_min", K::Real, "0", "slope asserted when slope_max > slope_min"},
                  {"slope_max", K::Real, "0", ""}},
                 {"max_distance", "max_leakage", "leakage_slope"},
                 oracle_validate});
    return s;
}

}  // namespace

bool is_numeric(Kind k) { return k == Kind::Real || k == Kind::Integer; }

void check_value(const ParamSpec& spec, const std::string& value) {
    double d;
    long long i;
    bool b;
    switch (spec.kind) {
        case Kind::Real:
            if (!parse_real(value, d)) bad_value(spec.name, value, "a finite number");
            break;
        case Kind::Integer:
            if (!parse_integer(value, i)) bad_value(spec.name, value, "an integer");
            break;
        case Kind::Bool:
            if (!parse_bool(value, b)) bad_value(spec.name, value, "true or false");
            break;
        case Kind::RealList:
            for (const std::string& c : split(value, ',')) {
                if (!parse_real(c, d)) bad_value(spec.name, value, "a comma-separated number list");
            }
            break;
        case Kind::TupleList:
            for (const std::string& t : split(value, ';')) {
                const auto cells = split(t, ',');
                if (cells.size() != 3) bad_value(spec.name, value, "triples like 0,0,1;0,1,2");
                for (const std::string& c : cells) {
                    if (!parse_integer(c, i)) bad_value(spec.name, value, "integer triples");
                }
            }
            break;
        case Kind::Text:
            break;
    }
}

double Params::real(const std::string& key) const {
    double v;
    if (!parse_real(values_.at(key), v)) bad_value(key, values_.at(key), "a finite number");
    return v;
}

long long Params::integer(const std::string& key) const {
    long long v;
    if (!parse_integer(values_.at(key), v)) bad_value(key, values_.at(key), "an integer");
    return v;
}

bool Params::flag(const std::string& key) const {
    bool v;
    if (!parse_bool(values_.at(key), v)) bad_value(key, values_.at(key), "true or false");
    return v;
}

std::vector<double> Params::reals(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& c : split(values_.at(key), ',')) {
        double v;
        if (!parse_real(c, v)) bad_value(key, values_.at(key), "a comma-separated number list");
        out.push_back(v);
    }
    return out;
}

std::vector<std::array<int, 3>> Params::tuples(const std::string& key) const {
    std::vector<std::array<int, 3>> out;
    for (const std::string& t : split(values_.at(key), ';')) {
        const auto cells = split(t, ',');
        if (cells.size() != 3) bad_value(key, values_.at(key), "triples like 0,0,1;0,1,2");
        std::array<int, 3> a{};
        for (int j = 0; j < 3; ++j) {
            long long v;
            if (!parse_integer(cells[j], v) || v < 0 || v > 1000000) {
                bad_value(key, values_.at(key), "nonnegative integer triples");
            }
            a[j] = static_cast<int>(v);
        }
        out.push_back(a);
    }
    return out;
}

const std::string& Params::text(const std::string& key) const { return values_.at(key); }

const std::vector<Scenario>& registry() {
    static const std::vector<Scenario> r = build_registry();
    return r;
}

const Scenario& find_scenario(const std::string& name) {
    for (const Scenario& s : registry()) {
        if (s.name == name) return s;
    }
    throw ConfigError("unknown scenario '" + name + "'");
}

const ParamSpec* find_param(const Scenario& s, const std::string& key) {
    for (const ParamSpec& p : s.params) {
        if (p.name == key) return &p;
    }
    return nullptr;
}

std::map<std::string, std::string> resolve(const Scenario& s,
                                           const std::map<std::string, std::string>& given) {
    std::map<std::string, std::string> out;
    for (const ParamSpec& p : s.params) out[p.name] = p.fallback;
    for (const auto& [k, v] : given) {
        const ParamSpec* spec = find_param(s, k);
        if (spec == nullptr) {
            throw ConfigError(fmt::format("unknown parameter '{}' for scenario '{}'", k, s.name));
        }
        check_value(*spec, v);
        out[k] = v;
    }
    return out;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";  // folds -0
    return fmt::format("{:.17g}", v);
}

std::string render_csv(const Table& t) {
    std::string out;
    for (const std::string& c : t.comments) out += "# " + c + "\n";
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
        if (j) out += ',';
        out += t.columns[j];
    }
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out += ',';
            out += format_number(row[j]);
        }
        out += '\n';
    }
    return out;
}

}  // namespace cqed::cli::detail
