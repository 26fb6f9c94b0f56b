#include "cqed/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cqed {

double max_asymmetry(const ComplexMatrix& m) {
    if (m.rows() != m.cols()) {
        throw std::invalid_argument("max_asymmetry: matrix must be square");
    }
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = i; j < m.cols(); ++j) {
            worst = std::max(worst, std::abs(m(i, j) - std::conj(m(j, i))));
        }
    }
    return worst;
}

bool is_hermitian(const ComplexMatrix& m, double rel_tol) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return max_asymmetry(m) <= rel_tol * scale;
}

void require_hermitian(const ComplexMatrix& m, double rel_tol) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw std::invalid_argument("generator must be a non-empty square matrix");
    }
    if (!is_hermitian(m, rel_tol)) {
        std::ostringstream msg;
        msg << "generator is not Hermitian: max |H(i,j) - conj(H(j,i))| = " << max_asymmetry(m)
            << " exceeds " << rel_tol << " (relative)";
        throw std::invalid_argument(msg.str());
    }
}

HermitianPropagator::HermitianPropagator(const ComplexMatrix& h, double rel_tol) {
    require_hermitian(h, rel_tol);
    // Symmetrize so that rounding in the caller never leaks into the solver.
    const ComplexMatrix sym = 0.5 * (h + h.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(sym);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("HermitianPropagator: eigendecomposition failed");
    }
    energies_ = solver.eigenvalues();
    vectors_ = solver.eigenvectors();
}

ComplexVector HermitianPropagator::evolve(const ComplexVector& psi0, double t) const {
    if (static_cast<std::size_t>(psi0.size()) != dim()) {
        throw std::invalid_argument("HermitianPropagator::evolve: dimension mismatch");
    }
    if (!std::isfinite(t)) {
        throw std::invalid_argument("HermitianPropagator::evolve: time must be finite");
    }
    ComplexVector c = vectors_.adjoint() * psi0;
    for (Eigen::Index k = 0; k < c.size(); ++k) {
        c(k) *= std::polar(1.0, -energies_(k) * t);
    }
    return vectors_ * c;
}

ComplexMatrix HermitianPropagator::unitary(double t) const {
    ComplexVector phases(energies_.size());
    for (Eigen::Index k = 0; k < phases.size(); ++k) {
        phases(k) = std::polar(1.0, -energies_(k) * t);
    }
    return vectors_ * phases.asDiagonal() * vectors_.adjoint();
}

StateVector expm_unitary(const ComplexMatrix& h, double t, const StateVector& psi0,
                         double hermitian_tol) {
    if (h.rows() != static_cast<Eigen::Index>(psi0.dim())) {
        std::ostringstream msg;
        msg << "expm_unitary: generator is " << h.rows() << "x" << h.cols() << " but state has dim "
            << psi0.dim();
        throw std::invalid_argument(msg.str());
    }
    HermitianPropagator prop(h, hermitian_tol);
    return StateVector(prop.evolve(psi0.amplitudes, t), psi0.basis_labels);
}

// ---------------------------------------------------------------------------

namespace {

struct Rk4Workspace {
    ComplexVector k1, k2, k3, k4, tmp;

    explicit Rk4Workspace(Eigen::Index n) : k1(n), k2(n), k3(n), k4(n), tmp(n) {}

    void step(const LinearGenerator& rhs, double t, double h, std::size_t piece,
              ComplexVector& x) {
        rhs(t, piece, x, k1);
        tmp = x + (0.5 * h) * k1;
        rhs(t + 0.5 * h, piece, tmp, k2);
        tmp = x + (0.5 * h) * k2;
        rhs(t + 0.5 * h, piece, tmp, k3);
        tmp = x + h * k3;
        rhs(t + h, piece, tmp, k4);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
};

}  // namespace

void rk4_step(const LinearGenerator& rhs, double t, double h, std::size_t piece, ComplexVector& x) {
    Rk4Workspace ws(x.size());
    ws.step(rhs, t, h, piece, x);
}

ComplexVector integrate_linear(const LinearGenerator& rhs, const ComplexVector& x0,
                               const std::vector<double>& t_grid, const IntegratorOptions& opt,
                               const Observer& observe) {
    if (t_grid.empty()) {
        throw std::invalid_argument("integrate_linear: empty time grid");
    }
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        if (!(t_grid[i] > t_grid[i - 1])) {
            throw std::invalid_argument("integrate_linear: time grid must be strictly increasing");
        }
    }
    std::vector<double> switches = opt.switch_times;
    std::sort(switches.begin(), switches.end());

    // Switch times at or before the start are already in effect.
    std::size_t piece = 0;
    while (piece < switches.size() && switches[piece] <= t_grid.front()) ++piece;

    ComplexVector x = x0;
    Rk4Workspace ws(x.size());
    if (observe) observe(0, t_grid.front(), x);

    auto advance = [&](double a, double b) {
        const double len = b - a;
        std::size_t n = 1;
        if (opt.max_step > 0.0) {
            n = static_cast<std::size_t>(std::ceil(len / opt.max_step - 1e-12));
            n = std::max<std::size_t>(n, 1);
        }
        const double h = len / static_cast<double>(n);
        if (opt.stability_bound > 0.0 && h > opt.stability_bound) {
            std::ostringstream msg;
            msg << "integrate_linear: step " << h << " exceeds declared stability bound "
                << opt.stability_bound;
            throw std::invalid_argument(msg.str());
        }
        for (std::size_t s = 0; s < n; ++s) {
            const double t = (s + 1 == n) ? b - h : a + static_cast<double>(s) * h;
            ws.step(rhs, t, h, piece, x);
        }
    };

    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        double a = t_grid[i - 1];
        const double b = t_grid[i];
        while (piece < switches.size() && switches[piece] < b) {
            if (switches[piece] > a) {
                advance(a, switches[piece]);
                a = switches[piece];
            }
            ++piece;
        }
        advance(a, b);
        while (piece < switches.size() && switches[piece] <= b) ++piece;
        if (observe) observe(i, b, x);
    }
    return x;
}

Trajectory integrate_linear(const LinearGenerator& rhs, const ComplexVector& x0,
                            const std::vector<double>& t_grid, const IntegratorOptions& opt) {
    Trajectory out;
    out.t.reserve(t_grid.size());
    out.x.reserve(t_grid.size());
    integrate_linear(rhs, x0, t_grid, opt, [&](std::size_t, double t, const ComplexVector& x) {
        out.t.push_back(t);
        out.x.push_back(x);
    });
    return out;
}

LinearGenerator matrix_generator(std::function<ComplexMatrix(double, std::size_t)> a) {
    return [a = std::move(a)](double t, std::size_t piece, const ComplexVector& x,
                              ComplexVector& dxdt) { dxdt.noalias() = a(t, piece) * x; };
}

LinearGenerator matrix_generator(ComplexMatrix a) {
    return [a = std::move(a)](double, std::size_t, const ComplexVector& x, ComplexVector& dxdt) {
        dxdt.noalias() = a * x;
    };
}

}  // namespace cqed
