#include "cqed/oracle.hpp"

#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace cqed::oracle {

namespace {

// <e+1| S+ |e> for the symmetric Dicke ladder of N two-level atoms.
double raise_factor(int e, int N) {
    return std::sqrt(static_cast<double>(e + 1) * static_cast<double>(N - e));
}

}  // namespace

double FullModelParams::dispersive_ratio() const {
    return std::abs(g_sigma) * std::sqrt(static_cast<double>(N)) / std::abs(Delta);
}

std::vector<std::string> FullModelParams::validate() const {
    if (N < 1 || N > kMaxAtomsPerNode) {
        throw std::invalid_argument("FullModelParams: N must be in [1, 6]");
    }
    if (nodes != 1 && nodes != 2) {
        throw std::invalid_argument("FullModelParams: nodes must be 1 or 2");
    }
    for (double v : {g_sigma, g_pi, Delta, Delta_prime}) {
        if (!std::isfinite(v)) throw std::invalid_argument("FullModelParams: non-finite value");
    }
    std::vector<std::string> warnings;
    if (Delta != 0.0) {
        const double r = dispersive_ratio();
        if (r > 0.2) {
            std::ostringstream msg;
            msg << "dispersive ratio g sqrt(N) / Delta = " << r << " exceeds 0.2";
            if (enforce_dispersive) throw std::invalid_argument("FullModelParams: " + msg.str());
            warnings.push_back(msg.str());
        }
    } else if (enforce_dispersive) {
        throw std::invalid_argument("FullModelParams: Delta = 0 is not dispersive");
    }
    return warnings;
}

processor::TwoNodeParams FullModelParams::effective() const {
    processor::TwoNodeParams e;
    e.N = N;
    e.Delta = Delta;
    e.Delta_prime = Delta_prime;
    e.Omega_sigma = g_sigma * g_sigma / Delta;
    e.Omega_pi = include_pi ? g_pi * g_pi / Delta_prime : 0.0;
    return e;
}

std::string DickeLabel::str() const {
    std::ostringstream s;
    s << "|" << n_sigma << "," << n_pi2 << "," << n_pi3 << ";" << e2 << "," << e3 << ">";
    return s.str();
}

DickeBasis::DickeBasis(int N, bool include_pi, int nodes)
    : N_(N), include_pi_(include_pi), nodes_(nodes) {
    if (N < 1 || N > kMaxAtomsPerNode) throw std::invalid_argument("DickeBasis: N out of range");
    if (nodes != 1 && nodes != 2) throw std::invalid_argument("DickeBasis: nodes must be 1 or 2");
    const int emax = std::min(kExcitationCap, N);
    const int pimax = include_pi ? kExcitationCap : 0;
    const int e3max = nodes == 2 ? emax : 0;
    const int pi3max = nodes == 2 ? pimax : 0;
    // Ordered by total excitation first so that blocks are contiguous.
    for (int total = 0; total <= kExcitationCap; ++total) {
        for (int ns = 0; ns <= total; ++ns) {
            for (int p2 = 0; p2 <= pimax; ++p2) {
                for (int p3 = 0; p3 <= pi3max; ++p3) {
                    for (int e2 = 0; e2 <= emax; ++e2) {
                        for (int e3 = 0; e3 <= e3max; ++e3) {
                            DickeLabel l{ns, p2, p3, e2, e3};
                            if (l.excitations() != total) continue;
                            lookup_.emplace(l, labels_.size());
                            labels_.push_back(l);
                        }
                    }
                }
            }
        }
    }
}

std::size_t DickeBasis::index(const DickeLabel& l) const {
    const auto it = lookup_.find(l);
    if (it == lookup_.end()) {
        throw std::logic_error("DickeBasis: state " + l.str() + " outside the symmetric sector");
    }
    return it->second;
}

std::shared_ptr<const DickeBasis> dicke_basis(int N, bool include_pi, int nodes) {
    static std::mutex mu;
    static std::map<std::tuple<int, bool, int>, std::shared_ptr<const DickeBasis>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{N, include_pi, nodes}];
    if (!slot) slot = std::make_shared<const DickeBasis>(N, include_pi, nodes);
    return slot;
}

ComplexMatrix build_full_h(const FullModelParams& p) {
    p.validate();
    const auto basis = dicke_basis(p.N, p.include_pi, p.nodes);
    const std::size_t dim = basis->dim();
    ComplexMatrix h = ComplexMatrix::Zero(static_cast<Eigen::Index>(dim),
                                          static_cast<Eigen::Index>(dim));
    const int emax = std::min(kExcitationCap, p.N);

    // Adds coupling g * sqrt(photons) * raise_factor between `from` and the
    // state with one photon absorbed into node `node`.
    auto couple = [&](std::size_t i, const DickeLabel& from, int DickeLabel::*photons, int node,
                      double g) {
        const int e = node == 2 ? from.e2 : from.e3;
        if (g == 0.0 || from.*photons == 0 || e >= emax) return;
        DickeLabel to = from;
        to.*photons -= 1;
        (node == 2 ? to.e2 : to.e3) += 1;
        const std::size_t j = basis->index(to);
        const double v = g * std::sqrt(static_cast<double>(from.*photons)) * raise_factor(e, p.N);
        h(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) += v;
        h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += v;
    };

    for (std::size_t i = 0; i < dim; ++i) {
        const DickeLabel& l = basis->labels()[i];
        const auto ii = static_cast<Eigen::Index>(i);
        h(ii, ii) = -p.Delta * l.n_sigma - p.Delta_prime * (l.n_pi2 + l.n_pi3);
        couple(i, l, &DickeLabel::n_sigma, 2, p.g_sigma);
        if (p.nodes == 2) couple(i, l, &DickeLabel::n_sigma, 3, p.g_sigma);
        if (p.include_pi) {
            couple(i, l, &DickeLabel::n_pi2, 2, p.g_pi);
            if (p.nodes == 2) couple(i, l, &DickeLabel::n_pi3, 3, p.g_pi);
        }
    }
    return h;
}

RealVector excitation_numbers(const DickeBasis& b) {
    RealVector n(static_cast<Eigen::Index>(b.dim()));
    for (std::size_t i = 0; i < b.dim(); ++i) {
        n(static_cast<Eigen::Index>(i)) = b.labels()[i].excitations();
    }
    return n;
}

ComplexVector lift(const DickeBasis& b, const processor::CollectiveState& s) {
    if (b.nodes() != 2) throw std::invalid_argument("lift: needs two processing nodes");
    ComplexVector v = ComplexVector::Zero(static_cast<Eigen::Index>(b.dim()));
    auto at = [&](int e2, int e3) -> cd& {
        return v(static_cast<Eigen::Index>(b.index(DickeLabel{0, 0, 0, e2, e3})));
    };
    at(0, 0) = s.amps[0];
    at(1, 0) = s.amps[1];
    at(0, 1) = s.amps[2];
    at(1, 1) = s.amps[3];
    if (s.amps[4] != cd(0.0, 0.0)) {
        if (b.N() < 2) throw std::invalid_argument("lift: psi5 needs N >= 2");
        at(2, 0) = s.amps[4] / std::sqrt(2.0);
        at(0, 2) = s.amps[4] / std::sqrt(2.0);
    }
    return v;
}

Validation validate_effective(const FullModelParams& p, const processor::QubitPair& q, double t) {
    p.validate();
    if (p.nodes != 2) throw std::invalid_argument("validate_effective: needs two processing nodes");
    const auto basis = dicke_basis(p.N, p.include_pi, p.nodes);
    const processor::CollectiveState s0 = processor::embed_pair(q);

    const HermitianPropagator full(build_full_h(p));
    ComplexVector psi = full.evolve(lift(*basis, s0), t);

    const ComplexMatrix h_eff = processor::h_eff_sigma_pi(p.effective());
    const processor::CollectiveState eff = processor::evolve_exact(h_eff, s0, t);
    const ComplexVector reference = lift(*basis, eff);

    double kept = 0.0;
    for (std::size_t i = 0; i < basis->dim(); ++i) {
        const DickeLabel& l = basis->labels()[i];
        const auto ii = static_cast<Eigen::Index>(i);
        if (l.n_sigma + l.n_pi2 + l.n_pi3 == 0) {
            kept += std::norm(psi(ii));
        } else {
            psi(ii) = 0.0;
        }
    }

    Validation v;
    v.leakage = 1.0 - kept;
    v.dispersive_ratio_sq = p.dispersive_ratio() * p.dispersive_ratio();
    if (v.leakage > 0.5) {
        std::ostringstream msg;
        msg << "validate_effective: photon leakage " << v.leakage
            << " > 0.5, outside the dispersive regime";
        throw std::invalid_argument(msg.str());
    }

    const auto vac = static_cast<Eigen::Index>(basis->index(DickeLabel{}));
    if (std::abs(reference(vac)) > 1e-12 && std::abs(psi(vac)) > 1e-12) {
        v.global_phase = std::arg(reference(vac)) - std::arg(psi(vac));
        psi *= std::polar(1.0, v.global_phase);
    }
    v.distance = (psi - reference).norm();
    return v;
}

}  // namespace cqed::oracle
