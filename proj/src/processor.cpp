#include "cqed/processor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cqed::processor {

namespace {

constexpr cd kI{0.0, 1.0};

void require_n(int N) {
    if (N < 1) throw std::invalid_argument("number of atoms per node must be >= 1");
}

double pair_coupling(int N, double omega_sigma) {
    return 2.0 * omega_sigma * std::sqrt(static_cast<double>(N) * static_cast<double>(N - 1));
}

double condition_tau(int n, int mu) { return kPi * (0.25 + 0.5 * mu + n); }

void require_tuple(int n, int mu, int k) {
    if (mu != 0 && mu != 1) throw std::invalid_argument("cde: mu must be 0 or 1");
    if (n < 0) throw std::invalid_argument("cde: n must be >= 0");
    if (k < 1) throw std::invalid_argument("cde: k must be >= 1");
}

}  // namespace

const std::vector<std::string>& basis_labels() {
    static const std::vector<std::string> labels{"|0>2|0>3", "|1>2|0>3", "|0>2|1>3", "|1>2|1>3",
                                                 "(|2>2|0>3+|0>2|2>3)/sqrt2"};
    return labels;
}

void TwoNodeParams::validate() const {
    require_n(N);
    for (double v : {Omega_sigma, Omega_pi, Delta, Delta_prime, phi}) {
        if (!std::isfinite(v)) throw std::invalid_argument("TwoNodeParams: non-finite value");
    }
    if (Delta > 0.0 && Delta_prime == -Delta && Omega_pi > 0.0) {
        throw std::invalid_argument(
            "TwoNodeParams: with Delta > 0 and Delta' = -Delta, Omega_pi must be <= 0");
    }
}

TwoNodeParams TwoNodeParams::from_couplings(int N, double g_sigma, double g_pi, double Delta,
                                            double phi) {
    if (Delta == 0.0) throw std::invalid_argument("TwoNodeParams: Delta must be nonzero");
    TwoNodeParams p;
    p.N = N;
    p.Delta = Delta;
    p.Delta_prime = -Delta;
    p.Omega_sigma = g_sigma * g_sigma / Delta;
    p.Omega_pi = -g_pi * g_pi / Delta;
    p.phi = phi;
    p.validate();
    return p;
}

double CollectiveState::norm() const {
    double s = 0.0;
    for (const cd& a : amps) s += std::norm(a);
    return std::sqrt(s);
}

ComplexVector CollectiveState::vector() const {
    ComplexVector v(kBasisDim);
    for (int i = 0; i < kBasisDim; ++i) v(i) = amps[static_cast<std::size_t>(i)];
    return v;
}

CollectiveState CollectiveState::from_vector(const ComplexVector& v) {
    if (v.size() != kBasisDim) throw std::invalid_argument("CollectiveState: need 5 amplitudes");
    CollectiveState s;
    for (int i = 0; i < kBasisDim; ++i) s.amps[static_cast<std::size_t>(i)] = v(i);
    return s;
}

StateVector CollectiveState::state_vector() const { return StateVector(vector(), basis_labels()); }

void QubitPair::validate(double tol) const {
    const double n2 = std::norm(alpha2) + std::norm(beta2);
    const double n3 = std::norm(alpha3) + std::norm(beta3);
    if (std::abs(n2 - 1.0) > tol || std::abs(n3 - 1.0) > tol) {
        std::ostringstream msg;
        msg << "QubitPair not normalized: |a2|^2+|b2|^2 = " << n2 << ", |a3|^2+|b3|^2 = " << n3;
        throw std::invalid_argument(msg.str());
    }
}

QubitPair QubitPair::from_bloch(double theta2, double phi2, double theta3, double phi3) {
    QubitPair q;
    q.alpha2 = std::cos(0.5 * theta2);
    q.beta2 = std::polar(std::sin(0.5 * theta2), phi2);
    q.alpha3 = std::cos(0.5 * theta3);
    q.beta3 = std::polar(std::sin(0.5 * theta3), phi3);
    return q;
}

CollectiveState embed_pair(const QubitPair& q) {
    q.validate();
    CollectiveState s;
    s.amps = {q.alpha2 * q.alpha3, q.beta2 * q.alpha3, q.alpha2 * q.beta3, q.beta2 * q.beta3,
              cd(0.0, 0.0)};
    return s;
}

ComplexMatrix h_eff_sigma(int N, double omega_sigma) {
    TwoNodeParams p;
    p.N = N;
    p.Omega_sigma = omega_sigma;
    return h_eff_sigma_pi(p);
}

ComplexMatrix h_eff_sigma_pi(const TwoNodeParams& p) {
    p.validate();
    const double n = p.N;
    const double os = p.omega_s();
    ComplexMatrix h = ComplexMatrix::Zero(kBasisDim, kBasisDim);
    h(1, 1) = os * n;
    h(2, 2) = os * n;
    h(1, 2) = std::polar(p.Omega_sigma * n, p.phi);
    h(2, 1) = std::conj(h(1, 2));
    h(3, 3) = 2.0 * os * n;
    h(3, 4) = pair_coupling(p.N, p.Omega_sigma);
    h(4, 3) = h(3, 4);
    h(4, 4) = 2.0 * os * (n - 1.0);
    return h;
}

CollectiveState evolve_exact(const ComplexMatrix& h, const CollectiveState& s0, double t) {
    if (h.rows() != kBasisDim || h.cols() != kBasisDim) {
        throw std::invalid_argument("evolve_exact: generator must be 5x5");
    }
    const StateVector out = expm_unitary(h, t, s0.state_vector());
    return CollectiveState::from_vector(out.amplitudes);
}

CollectiveState evolve_closed_form_sigma(const QubitPair& q, int N, double omega_sigma, double t) {
    require_n(N);
    q.validate();
    const double th = omega_sigma * N * t;
    const cd e1 = std::exp(-kI * th);
    const cd e2 = std::exp(-2.0 * kI * th);
    const double c = std::cos(th), s = std::sin(th);
    CollectiveState out;
    out.amps[0] = q.alpha2 * q.alpha3;
    out.amps[1] = e1 * (q.beta2 * q.alpha3 * c - kI * q.alpha2 * q.beta3 * s);
    out.amps[2] = e1 * (q.alpha2 * q.beta3 * c - kI * q.beta2 * q.alpha3 * s);
    out.amps[3] = e2 * q.beta2 * q.beta3 * std::cos(2.0 * th);
    out.amps[4] = e2 * q.beta2 * q.beta3 * (-kI * std::sin(2.0 * th));
    return out;
}

CollectiveState evolve_closed_form_sigma_pi(const QubitPair& q, const TwoNodeParams& p, double t) {
    p.validate();
    q.validate();
    const double n = p.N;
    const double os = p.omega_s();
    const double th = p.Omega_sigma * n * t;
    const double c = std::cos(th), s = std::sin(th);
    const cd single = std::exp(-kI * os * n * t);
    const cd dressed_plus = std::polar(1.0, p.phi);
    CollectiveState out;
    out.amps[0] = q.alpha2 * q.alpha3;
    out.amps[1] = single * (q.beta2 * q.alpha3 * c - kI * dressed_plus * q.alpha2 * q.beta3 * s);
    out.amps[2] =
        single * (q.alpha2 * q.beta3 * c - kI * std::conj(dressed_plus) * q.beta2 * q.alpha3 * s);

    const double coupling = pair_coupling(p.N, p.Omega_sigma);
    const double S = std::sqrt(coupling * coupling + os * os);
    const cd pair = std::exp(-kI * os * (2.0 * n - 1.0) * t) * q.beta2 * q.beta3;
    const double sinc_t = S > 0.0 ? std::sin(S * t) / S : t;  // sin(St)/S
    out.amps[3] = pair * (std::cos(S * t) - kI * os * sinc_t);
    out.amps[4] = pair * (-kI * coupling * sinc_t);
    return out;
}

CollectiveState iswap_target(const QubitPair& q) {
    q.validate();
    CollectiveState s;
    s.amps = {q.alpha3 * q.alpha2, -q.beta3 * q.alpha2, -q.alpha3 * q.beta2, q.beta3 * q.beta2,
              cd(0.0, 0.0)};
    return s;
}

double overlap_fidelity(const CollectiveState& a, const CollectiveState& b) {
    cd ip(0.0, 0.0);
    for (std::size_t i = 0; i < a.amps.size(); ++i) ip += std::conj(a.amps[i]) * b.amps[i];
    return std::norm(ip);
}

double relative_phase(const CollectiveState& a, const CollectiveState& b) {
    cd ip(0.0, 0.0);
    for (std::size_t i = 0; i < a.amps.size(); ++i) ip += std::conj(a.amps[i]) * b.amps[i];
    return std::arg(ip);
}

double iswap_time(int N, double omega_sigma) {
    require_n(N);
    if (omega_sigma == 0.0 || !std::isfinite(omega_sigma)) {
        throw std::invalid_argument("iswap: Omega_sigma must be nonzero (no interaction)");
    }
    return kPi / (2.0 * omega_sigma * N);
}

IswapResult iswap(const QubitPair& q, int N, double omega_sigma) {
    IswapResult r;
    r.t_gate = iswap_time(N, omega_sigma);
    r.state = evolve_exact(h_eff_sigma(N, omega_sigma), embed_pair(q), r.t_gate);
    const CollectiveState target = iswap_target(q);
    r.fidelity = overlap_fidelity(target, r.state);
    r.global_phase = relative_phase(target, r.state);
    const cd ph = std::polar(1.0, r.global_phase);
    double err = 0.0;
    for (std::size_t i = 0; i < target.amps.size(); ++i) {
        err += std::norm(r.state.amps[i] - ph * target.amps[i]);
    }
    r.amplitude_error = std::sqrt(err);
    return r;
}

// ---------------------------------------------------------------------------

double GateConditionSolution::omega_s(double omega_sigma) const {
    return -ratio * omega_sigma * N;
}

double GateConditionSolution::gate_time(double omega_sigma) const {
    return tau / (omega_sigma * N);
}

double cde_ratio_large_n(int n, int mu, int k) {
    require_tuple(n, mu, k);
    const double tau = condition_tau(n, mu);
    const double pk = kPi * k;
    const double rhs = pk * pk - 4.0 * tau * tau;
    if (rhs < 0.0) return std::nan("");
    return std::sqrt(rhs) / tau;
}

double cde_ratio_published(int n, int mu, int k) {
    require_tuple(n, mu, k);
    const double tau = condition_tau(n, mu);
    const double pk = 2.0 * kPi * k;
    const double rhs = pk * pk - 16.0 * tau * tau;
    if (rhs < 0.0) return std::nan("");
    return std::sqrt(rhs) / tau;
}

GateConditionSolution cde_solve(int n, int mu, int k, int N) {
    require_tuple(n, mu, k);
    require_n(N);
    GateConditionSolution sol;
    sol.n = n;
    sol.mu = mu;
    sol.k = k;
    sol.N = N;
    sol.tau = condition_tau(n, mu);

    const double pk = kPi * k;
    const double need = 4.0 * sol.tau * sol.tau * (N - 1.0) / N;
    const double rhs = pk * pk - need;
    if (rhs < 0.0) {
        std::ostringstream msg;
        msg << "cde_solve: (n=" << n << ", mu=" << mu << ", k=" << k << ", N=" << N
            << ") infeasible: (pi k)^2 = " << pk * pk << " < 4 tau^2 (N-1)/N = " << need
            << " (deficit " << -rhs << ")";
        throw InfeasibleConditions(msg.str(), -rhs);
    }
    sol.omega_s_t = std::sqrt(rhs);
    sol.ratio = sol.omega_s_t / sol.tau;

    // Verification in units Omega_sigma = 1.
    const double t = sol.gate_time(1.0);
    TwoNodeParams p;
    p.N = N;
    p.Omega_sigma = 1.0;
    p.Omega_pi = sol.omega_s(1.0) - 1.0;
    const double coupling = pair_coupling(N, 1.0);
    const double S = std::sqrt(coupling * coupling + p.omega_s() * p.omega_s());
    sol.residual_time = std::abs(p.Omega_sigma * N * t - condition_tau(n, mu));
    sol.residual_rotation = std::abs(S * t - pk);

    CollectiveState start;
    start.amps[3] = 1.0;
    const CollectiveState end = evolve_exact(h_eff_sigma_pi(p), start, t);
    sol.residual_psi5 = std::norm(end.amps[4]);
    return sol;
}

CollectiveState cde_closed_form(const QubitPair& q, const GateConditionSolution& sol,
                                double omega_sigma) {
    q.validate();
    const double n = sol.N;
    const double t = sol.gate_time(omega_sigma);
    const double os = sol.omega_s(omega_sigma);
    const double sign_n = (sol.n % 2 == 0) ? 1.0 : -1.0;
    const double sign_mu = (sol.mu % 2 == 0) ? 1.0 : -1.0;
    const double sign_k = (sol.k % 2 == 0) ? 1.0 : -1.0;
    const cd single = sign_n / std::sqrt(2.0) * std::exp(-kI * os * n * t);
    CollectiveState out;
    out.amps[0] = q.alpha2 * q.alpha3;
    out.amps[1] = single * (sign_mu * q.beta2 * q.alpha3 - kI * q.alpha2 * q.beta3);
    out.amps[2] = single * (sign_mu * q.alpha2 * q.beta3 - kI * q.beta2 * q.alpha3);
    out.amps[3] = sign_k * std::exp(-kI * os * (2.0 * n - 1.0) * t) * q.beta2 * q.beta3;
    return out;
}

SqrtIswapResult sqrt_iswap_cde(const QubitPair& q, const GateConditionSolution& sol, int N,
                               double omega_sigma) {
    if (sol.N != N) {
        std::ostringstream msg;
        msg << "sqrt_iswap_cde: stale solution (solved for N = " << sol.N << ", used with N = " << N
            << ")";
        throw std::invalid_argument(msg.str());
    }
    require_tuple(sol.n, sol.mu, sol.k);
    const double tau = condition_tau(sol.n, sol.mu);
    const double expected_st = std::sqrt(kPi * kPi * sol.k * sol.k - 4.0 * tau * tau * (N - 1.0) / N);
    if (std::abs(sol.tau - tau) > 1e-12 || std::abs(sol.omega_s_t - expected_st) > 1e-9 ||
        std::abs(sol.ratio * sol.tau - sol.omega_s_t) > 1e-9) {
        throw std::invalid_argument("sqrt_iswap_cde: stale solution (fields do not match (n, mu, k))");
    }
    if (!(sol.residual_psi5 <= 1e-10)) {
        throw std::invalid_argument("sqrt_iswap_cde: solution not validated (psi5 residual > 1e-10)");
    }
    if (omega_sigma == 0.0 || !std::isfinite(omega_sigma)) {
        throw std::invalid_argument("sqrt_iswap_cde: Omega_sigma must be nonzero");
    }
    TwoNodeParams p;
    p.N = N;
    p.Omega_sigma = omega_sigma;
    p.Omega_pi = sol.omega_s(omega_sigma) - omega_sigma;

    SqrtIswapResult r;
    r.t_gate = sol.gate_time(omega_sigma);
    r.state = evolve_exact(h_eff_sigma_pi(p), embed_pair(q), r.t_gate);
    r.closed_form = cde_closed_form(q, sol, omega_sigma);
    r.fidelity_to_closed_form = overlap_fidelity(r.closed_form, r.state);
    r.psi5_population = std::norm(r.state.amps[4]);
    return r;
}

// ---------------------------------------------------------------------------

CollectiveState blockade_closed_form(const QubitPair& q, const TwoNodeParams& p, double t) {
    p.validate();
    q.validate();
    const double n = p.N;
    const double os = p.omega_s();
    const double th = p.Omega_sigma * n * t;
    const double c = std::cos(th), s = std::sin(th);
    const cd single = std::exp(-kI * os * n * t);
    const cd dressed_plus = std::polar(1.0, p.phi);
    CollectiveState out;
    out.amps[0] = q.alpha2 * q.alpha3;
    out.amps[1] = single * (q.beta2 * q.alpha3 * c - kI * dressed_plus * q.alpha2 * q.beta3 * s);
    out.amps[2] =
        single * (q.alpha2 * q.beta3 * c - kI * std::conj(dressed_plus) * q.beta2 * q.alpha3 * s);
    out.amps[3] = std::exp(-2.0 * kI * os * n * t) * q.beta2 * q.beta3;
    return out;
}

BlockadeResult blockade_evolution(const QubitPair& q, const TwoNodeParams& p, double t,
                                  std::size_t samples) {
    p.validate();
    if (samples == 0) throw std::invalid_argument("blockade_evolution: need >= 1 sample interval");
    BlockadeResult r;
    const double n = p.N;
    const double os = p.omega_s();
    const double coupling = pair_coupling(p.N, p.Omega_sigma);
    const double S = std::sqrt(coupling * coupling + os * os);
    r.transfer_bound = S > 0.0 ? (coupling / S) * (coupling / S) : 0.0;
    r.in_blockade_regime = std::abs(os) >= 10.0 * n * std::abs(p.Omega_sigma);
    if (!r.in_blockade_regime) {
        r.warnings.emplace_back("|Omega_s| < 10 N Omega_sigma: outside the blockade regime");
    }

    const HermitianPropagator prop(h_eff_sigma_pi(p));
    const ComplexVector psi0 = embed_pair(q).vector();
    for (std::size_t i = 0; i <= samples; ++i) {
        const double ti = t * static_cast<double>(i) / static_cast<double>(samples);
        const CollectiveState si = CollectiveState::from_vector(prop.evolve(psi0, ti));
        const CollectiveState ci = blockade_closed_form(q, p, ti);
        r.max_psi5_pop = std::max(r.max_psi5_pop, std::norm(si.amps[4]));
        for (std::size_t b = 0; b < si.amps.size(); ++b) {
            r.deviation = std::max(r.deviation, std::abs(std::norm(si.amps[b]) - std::norm(ci.amps[b])));
        }
        if (i == samples) {
            r.state = si;
            r.closed_form = ci;
        }
    }
    return r;
}

}  // namespace cqed::processor
