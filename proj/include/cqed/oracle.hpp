// Exact small-N reference for the dispersive effective Hamiltonians: atoms of
// one or two nodes, the shared sigma mode and optional local pi modes, restricted
// to the symmetric (Dicke) sector with at most two excitations.

#pragma once

#include "cqed/numerics.hpp"
#include "cqed/processor.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace cqed::oracle {

inline constexpr int kMaxAtomsPerNode = 6;
inline constexpr int kExcitationCap = 2;

struct FullModelParams {
    int N = 2;              // atoms per node
    int nodes = 2;          // 1 or 2 processing nodes
    double g_sigma = 0.0;   // atom <-> shared sigma mode
    double g_pi = 0.0;      // atom <-> local pi mode
    double Delta = 1.0;     // atom - sigma mode
    double Delta_prime = -1.0;  // atom - pi mode
    bool include_pi = false;
    bool enforce_dispersive = true;

    double dispersive_ratio() const;  // g_sigma sqrt(N) / |Delta|

    /// Throws on N outside [1, 6], nodes outside {1, 2}, or (when enforced)
    /// dispersive ratio above 0.2. Returns warnings otherwise.
    std::vector<std::string> validate() const;

    /// Matching effective couplings in the processor's parametrization.
    processor::TwoNodeParams effective() const;
};

struct DickeLabel {
    int n_sigma = 0;
    int n_pi2 = 0;
    int n_pi3 = 0;
    int e2 = 0;
    int e3 = 0;

    int excitations() const { return n_sigma + n_pi2 + n_pi3 + e2 + e3; }
    std::string str() const;
    auto operator<=>(const DickeLabel&) const = default;
};

class DickeBasis {
public:
    DickeBasis(int N, bool include_pi, int nodes);

    int N() const { return N_; }
    bool include_pi() const { return include_pi_; }
    int nodes() const { return nodes_; }
    std::size_t dim() const { return labels_.size(); }
    const std::vector<DickeLabel>& labels() const { return labels_; }

    /// Index of a label; throws std::logic_error if it lies outside the basis.
    std::size_t index(const DickeLabel& l) const;
    bool contains(const DickeLabel& l) const { return lookup_.count(l) != 0; }

private:
    int N_;
    bool include_pi_;
    int nodes_;
    std::vector<DickeLabel> labels_;
    std::map<DickeLabel, std::size_t> lookup_;
};

/// Shared immutable basis per (N, include_pi, nodes).
std::shared_ptr<const DickeBasis> dicke_basis(int N, bool include_pi, int nodes = 2);

/// Hamiltonian in the frame rotating with the atoms: photons carry -Delta
/// (sigma) and -Delta' (pi); collective couplings carry the Dicke factors
/// sqrt((e+1)(N-e)).
ComplexMatrix build_full_h(const FullModelParams& p);

/// Total excitation number operator (diagonal) over the basis.
RealVector excitation_numbers(const DickeBasis& b);

/// Five-state collective amplitudes lifted to zero-photon Dicke states.
ComplexVector lift(const DickeBasis& b, const processor::CollectiveState& s);

struct Validation {
    double distance = 0.0;
    double leakage = 0.0;
    double dispersive_ratio_sq = 0.0;  // (g sqrt(N) / Delta)^2
    double global_phase = 0.0;         // applied to the full-model amplitudes
};

/// Compares the zero-photon projection of the exact evolution against the
/// effective five-state evolution from the same initial product state.
/// Throws if the photon leakage exceeds 0.5.
Validation validate_effective(const FullModelParams& p, const processor::QubitPair& q, double t);

}  // namespace cqed::oracle
