// Two-node collective gate engine in the five-state basis
//   psi1 = |0>|0>, psi2 = |1>|0>, psi3 = |0>|1>, psi4 = |1>|1>,
//   psi5 = (|2>|0> + |0>|2>) / sqrt(2)
// where |k>_m is the symmetric k-excitation Dicke state of node m.
//
// All rates share one arbitrary unit; times are in its inverse.

#pragma once

#include "cqed/numerics.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace cqed::processor {

inline constexpr int kBasisDim = 5;

const std::vector<std::string>& basis_labels();

struct TwoNodeParams {
    int N = 1;
    double Omega_sigma = 0.0;  // |g_sigma|^2 / Delta
    double Omega_pi = 0.0;     // -|g_pi|^2 / Delta
    double Delta = 0.0;
    double Delta_prime = 0.0;
    double phi = 0.0;

    double omega_s() const { return Omega_sigma + Omega_pi; }

    /// N >= 1, finite rates, and Omega_pi <= 0 when Delta > 0 and Delta' = -Delta.
    void validate() const;

    /// Omega_sigma = g_sigma^2 / Delta, Omega_pi = -g_pi^2 / Delta, Delta' = -Delta.
    static TwoNodeParams from_couplings(int N, double g_sigma, double g_pi, double Delta,
                                        double phi = 0.0);
};

struct CollectiveState {
    std::array<cd, kBasisDim> amps{};

    double norm() const;
    ComplexVector vector() const;
    static CollectiveState from_vector(const ComplexVector& v);
    StateVector state_vector() const;
};

struct QubitPair {
    cd alpha2{1.0, 0.0}, beta2{0.0, 0.0};
    cd alpha3{1.0, 0.0}, beta3{0.0, 0.0};

    void validate(double tol = 1e-12) const;

    /// alpha = cos(theta/2), beta = exp(i phi) sin(theta/2) for each node.
    static QubitPair from_bloch(double theta2, double phi2, double theta3, double phi3);
};

CollectiveState embed_pair(const QubitPair& q);

/// sigma-mode effective Hamiltonian (no local modes).
ComplexMatrix h_eff_sigma(int N, double omega_sigma);

/// Effective Hamiltonian with local pi-mode shifts, Omega_s = Omega_sigma + Omega_pi
/// on the diagonal. A constant inter-node phase phi enters the psi2/psi3 coupling;
/// psi5 is then the phase-dressed pair state so the (4,5) block stays real.
ComplexMatrix h_eff_sigma_pi(const TwoNodeParams& p);

CollectiveState evolve_exact(const ComplexMatrix& h, const CollectiveState& s0, double t);

/// Large-N closed form of the sigma-only dynamics. The (psi2, psi3) block is
/// exact; the (psi4, psi5) block carries O(1/N) errors.
CollectiveState evolve_closed_form_sigma(const QubitPair& q, int N, double omega_sigma, double t);

/// Closed form with local modes: exact for every N (the (psi4, psi5) block
/// rotates at S = sqrt(4 Os^2 N (N-1) + Omega_s^2)).
CollectiveState evolve_closed_form_sigma_pi(const QubitPair& q, const TwoNodeParams& p, double t);

/// Product state {a3|0> - b3|1>}_2 {a2|0> - b2|1>}_3 in the five-state basis.
CollectiveState iswap_target(const QubitPair& q);

/// |<a|b>|^2
double overlap_fidelity(const CollectiveState& a, const CollectiveState& b);

/// Phase of <a|b>, the global phase that maps a onto b for fidelity-one states.
double relative_phase(const CollectiveState& a, const CollectiveState& b);

struct IswapResult {
    CollectiveState state;
    double t_gate = 0.0;
    double fidelity = 0.0;
    double global_phase = 0.0;     // arg <target|state>
    double amplitude_error = 0.0;  // || state - e^{i phase} target ||
};

IswapResult iswap(const QubitPair& q, int N, double omega_sigma);

/// t_gate * N * Omega_sigma = pi / 2
double iswap_time(int N, double omega_sigma);

// ---------------------------------------------------------------------------
// Dynamical elimination of psi5: Omega_sigma N t = pi (1/4 + mu/2 + n) and S t = pi k.

struct GateConditionSolution {
    int n = 0;
    int mu = 0;
    int k = 1;
    int N = 1;
    double ratio = 0.0;         // |Omega_s| / (Omega_sigma N)
    double tau = 0.0;           // Omega_sigma N t
    double omega_s_t = 0.0;     // |Omega_s| t
    double residual_psi5 = 0.0; // |<psi5|Psi(t)>|^2 from a psi4 start
    double residual_time = 0.0;  // |Omega_sigma N t - pi (1/4 + mu/2 + n)|
    double residual_rotation = 0.0;  // |S t - pi k|

    /// Omega_s for a given Omega_sigma (negative branch, local modes red-detuned).
    double omega_s(double omega_sigma) const;
    double gate_time(double omega_sigma) const;
};

class InfeasibleConditions : public std::invalid_argument {
public:
    InfeasibleConditions(const std::string& what, double deficit)
        : std::invalid_argument(what), deficit_(deficit) {}
    double deficit() const { return deficit_; }

private:
    double deficit_;
};

/// Solves both conditions for Omega_s at finite N and verifies the psi5
/// residual by exact evolution (omega_sigma = 1). Throws InfeasibleConditions
/// when (pi k)^2 < 4 tau^2 (N-1)/N.
GateConditionSolution cde_solve(int n, int mu, int k, int N);

/// N -> infinity limit of the solved ratio: sqrt((pi k)^2 - 4 tau^2) / tau.
double cde_ratio_large_n(int n, int mu, int k);

/// Ratio in the published-table convention, |Omega_s| t = sqrt((2 pi k)^2 - 16 tau^2);
/// exactly twice cde_ratio_large_n and not a solution of S t = pi k.
double cde_ratio_published(int n, int mu, int k);

/// Closed form of the entangled output at a solved point.
CollectiveState cde_closed_form(const QubitPair& q, const GateConditionSolution& sol,
                                double omega_sigma);

struct SqrtIswapResult {
    CollectiveState state;
    CollectiveState closed_form;
    double t_gate = 0.0;
    double fidelity_to_closed_form = 0.0;
    double psi5_population = 0.0;
};

SqrtIswapResult sqrt_iswap_cde(const QubitPair& q, const GateConditionSolution& sol, int N,
                               double omega_sigma);

// ---------------------------------------------------------------------------

struct BlockadeResult {
    CollectiveState state;
    CollectiveState closed_form;
    double max_psi5_pop = 0.0;
    double transfer_bound = 0.0;   // (2 Os sqrt(N(N-1)) / S)^2
    double deviation = 0.0;        // max per-state population difference vs closed form
    bool in_blockade_regime = false;
    std::vector<std::string> warnings;
};

/// Closed form in the blockade limit: psi5 frozen out, psi4 phase exp(-2i Omega_s N t).
CollectiveState blockade_closed_form(const QubitPair& q, const TwoNodeParams& p, double t);

/// Evolves exactly under h_eff_sigma_pi, sampling the psi5 population on
/// `samples` + 1 equally spaced times over [0, t].
BlockadeResult blockade_evolution(const QubitPair& q, const TwoNodeParams& p, double t,
                                  std::size_t samples = 2000);

}  // namespace cqed::processor
