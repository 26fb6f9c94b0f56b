// Dense complex linear algebra and time-evolution kernels.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace cqed {

using cd = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

struct StateVector {
    ComplexVector amplitudes;
    std::vector<std::string> basis_labels;  // may be empty

    StateVector() = default;
    explicit StateVector(ComplexVector amps, std::vector<std::string> labels = {})
        : amplitudes(std::move(amps)), basis_labels(std::move(labels)) {}

    std::size_t dim() const { return static_cast<std::size_t>(amplitudes.size()); }
    double norm() const { return amplitudes.norm(); }
};

// Largest |M(i,j) - conj(M(j,i))|, absolute.
double max_asymmetry(const ComplexMatrix& m);

// Throws std::invalid_argument naming the asymmetry if m is not Hermitian to
// `rel_tol` relative to its largest entry.
void require_hermitian(const ComplexMatrix& m, double rel_tol = 1e-12);

bool is_hermitian(const ComplexMatrix& m, double rel_tol = 1e-12);

/// Eigendecomposition of a Hermitian generator, reused for evolution at many
/// times and for spectral diagnostics (gaps, splittings).
class HermitianPropagator {
public:
    explicit HermitianPropagator(const ComplexMatrix& h, double rel_tol = 1e-12);

    std::size_t dim() const { return static_cast<std::size_t>(energies_.size()); }
    const RealVector& energies() const { return energies_; }
    const ComplexMatrix& eigenvectors() const { return vectors_; }

    /// exp(-iHt) psi
    ComplexVector evolve(const ComplexVector& psi0, double t) const;
    ComplexMatrix unitary(double t) const;

private:
    RealVector energies_;
    ComplexMatrix vectors_;
};

/// Returns exp(-iHt) psi0 via Hermitian eigendecomposition. Labels are carried over.
StateVector expm_unitary(const ComplexMatrix& h, double t, const StateVector& psi0,
                         double hermitian_tol = 1e-12);

// ---------------------------------------------------------------------------
// Fixed-step RK4 for dx/dt = f(t, x). Steps are aligned to the output grid and
// to declared switch times so that no step straddles a discontinuity of f.

/// `piece` counts declared switch times passed: piece 0 precedes the first
/// switch time, piece k lies between switch k-1 and switch k.
using LinearGenerator =
    std::function<void(double t, std::size_t piece, const ComplexVector& x, ComplexVector& dxdt)>;

struct IntegratorOptions {
    double max_step = 0.0;         // <= 0: one step per output interval
    double stability_bound = 0.0;  // <= 0: unchecked
    std::vector<double> switch_times;
};

struct Trajectory {
    std::vector<double> t;
    std::vector<ComplexVector> x;
};

using Observer = std::function<void(std::size_t index, double t, const ComplexVector& x)>;

/// Integrates from t_grid.front(); `observe` sees x at every grid time,
/// including the initial one. Returns the final state.
ComplexVector integrate_linear(const LinearGenerator& rhs, const ComplexVector& x0,
                               const std::vector<double>& t_grid, const IntegratorOptions& opt,
                               const Observer& observe);

/// Same, recording x at every grid time.
Trajectory integrate_linear(const LinearGenerator& rhs, const ComplexVector& x0,
                            const std::vector<double>& t_grid, const IntegratorOptions& opt = {});

/// Dense constant or time-dependent matrix generator: dx/dt = A(t) x.
LinearGenerator matrix_generator(std::function<ComplexMatrix(double, std::size_t)> a);
LinearGenerator matrix_generator(ComplexMatrix a);

/// Single RK4 step, exposed for callers that manage their own stepping.
void rk4_step(const LinearGenerator& rhs, double t, double h, std::size_t piece, ComplexVector& x);

}  // namespace cqed
