#include "cqed/numerics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace cqed;

namespace {

ComplexMatrix random_hermitian(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    ComplexMatrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = cd(d(rng), d(rng));
    return 0.5 * (a + a.adjoint());
}

ComplexVector random_state(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    ComplexVector v(n);
    for (int i = 0; i < n; ++i) v(i) = cd(d(rng), d(rng));
    return v / v.norm();
}

StateVector wrap(const ComplexVector& v) {
    StateVector s;
    s.amplitudes = v;
    return s;
}

// Taylor series of exp(-iHt) to high order with scaling and squaring; an
// independent route for checking the eigendecomposition result.
ComplexMatrix taylor_expm(const ComplexMatrix& h, double t) {
    const int squarings = 10;
    const ComplexMatrix a = h * cd(0.0, -t / std::pow(2.0, squarings));
    ComplexMatrix term = ComplexMatrix::Identity(h.rows(), h.cols());
    ComplexMatrix sum = term;
    for (int k = 1; k < 30; ++k) {
        term = term * a / static_cast<double>(k);
        sum += term;
    }
    for (int s = 0; s < squarings; ++s) sum = sum * sum;
    return sum;
}

}  // namespace

TEST(ExpmUnitary, ZeroGeneratorIsIdentity) {
    std::mt19937_64 rng(1);
    for (int n : {1, 3, 7}) {
        const ComplexVector psi = random_state(n, rng);
        const StateVector out = expm_unitary(ComplexMatrix::Zero(n, n), 7.3, wrap(psi));
        EXPECT_LT((out.amplitudes - psi).norm(), 1e-15);
    }
}

TEST(ExpmUnitary, HalfRabiRotation) {
    ComplexMatrix sx(2, 2);
    sx << 0.0, 1.0, 1.0, 0.0;
    ComplexVector psi(2);
    psi << 1.0, 0.0;
    const StateVector out = expm_unitary(sx, kPi / 2.0, wrap(psi));
    EXPECT_NEAR(std::abs(out.amplitudes(0)), 0.0, 1e-15);
    EXPECT_NEAR(out.amplitudes(1).real(), 0.0, 1e-15);
    EXPECT_NEAR(out.amplitudes(1).imag(), -1.0, 1e-15);
}

TEST(ExpmUnitary, ForwardBackwardRoundTrip) {
    std::mt19937_64 rng(7);
    const ComplexMatrix h = random_hermitian(5, rng);
    const ComplexVector psi = random_state(5, rng);
    const StateVector fwd = expm_unitary(h, 1.0, wrap(psi));
    const StateVector back = expm_unitary(h, -1.0, fwd);
    EXPECT_LT((back.amplitudes - psi).norm(), 1e-10);
}

TEST(ExpmUnitary, AgreesWithTaylorSeries) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const ComplexMatrix h = random_hermitian(6, rng);
        const ComplexVector psi = random_state(6, rng);
        const ComplexVector ref = taylor_expm(h, 2.5) * psi;
        EXPECT_LT((expm_unitary(h, 2.5, wrap(psi)).amplitudes - ref).norm(), 1e-11);
    }
}

TEST(ExpmUnitary, KeepsBasisLabels) {
    StateVector s;
    s.amplitudes = ComplexVector::Zero(2);
    s.amplitudes(0) = 1.0;
    s.basis_labels = {"g", "e"};
    const StateVector out = expm_unitary(ComplexMatrix::Identity(2, 2), 1.0, s);
    EXPECT_EQ(out.basis_labels, s.basis_labels);
}

TEST(ExpmUnitary, RejectsNonHermitianNamingAsymmetry) {
    ComplexMatrix h(2, 2);
    h << 0.0, 1.0, 0.5, 0.0;
    ComplexVector psi(2);
    psi << 1.0, 0.0;
    try {
        expm_unitary(h, 1.0, wrap(psi));
        FAIL() << "expected rejection";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("0.5"), std::string::npos) << e.what();
    }
    EXPECT_NEAR(max_asymmetry(h), 0.5, 1e-15);
}

TEST(ExpmUnitary, RejectsDimensionMismatch) {
    ComplexVector psi(3);
    psi << 1.0, 0.0, 0.0;
    EXPECT_THROW(expm_unitary(ComplexMatrix::Identity(2, 2), 1.0, wrap(psi)),
                 std::invalid_argument);
}

TEST(ExpmUnitary, RejectsNonFiniteTime) {
    ComplexVector psi(1);
    psi << 1.0;
    EXPECT_THROW(expm_unitary(ComplexMatrix::Identity(1, 1), NAN, wrap(psi)),
                 std::invalid_argument);
}

TEST(ExpmUnitaryProperty, NormPreserved) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> time(-50.0, 50.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 9;
        const ComplexMatrix h = random_hermitian(n, rng);
        const StateVector out = expm_unitary(h, time(rng), wrap(random_state(n, rng)));
        EXPECT_NEAR(out.norm(), 1.0, 1e-10);
    }
}

TEST(ExpmUnitaryProperty, Composition) {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> time(-5.0, 5.0);
    for (int trial = 0; trial < 100; ++trial) {
        const ComplexMatrix h = random_hermitian(5, rng);
        const StateVector psi = wrap(random_state(5, rng));
        const double t1 = time(rng), t2 = time(rng);
        const StateVector once = expm_unitary(h, t1 + t2, psi);
        const StateVector twice = expm_unitary(h, t2, expm_unitary(h, t1, psi));
        EXPECT_LT((once.amplitudes - twice.amplitudes).norm(), 1e-9);
    }
}

TEST(HermitianPropagator, UnitaryMatrixIsUnitary) {
    std::mt19937_64 rng(31);
    const HermitianPropagator prop(random_hermitian(8, rng));
    const ComplexMatrix u = prop.unitary(3.1);
    EXPECT_LT((u.adjoint() * u - ComplexMatrix::Identity(8, 8)).norm(), 1e-12);
}

TEST(HermitianPropagator, EnergiesSortedAndMatchTrace) {
    std::mt19937_64 rng(37);
    const ComplexMatrix h = random_hermitian(6, rng);
    const HermitianPropagator prop(h);
    for (Eigen::Index i = 1; i < prop.energies().size(); ++i) {
        EXPECT_LE(prop.energies()(i - 1), prop.energies()(i));
    }
    EXPECT_NEAR(prop.energies().sum(), h.trace().real(), 1e-12);
}

// ---------------------------------------------------------------------------

TEST(IntegrateLinear, PurePhaseFullRevolution) {
    const double delta = 2.7;
    ComplexMatrix a(1, 1);
    a << cd(0.0, -delta);
    ComplexVector x0(1);
    x0 << 1.0;
    IntegratorOptions opt;
    opt.max_step = 1e-3;
    const Trajectory tr = integrate_linear(matrix_generator(a), x0, {0.0, 2.0 * kPi / delta}, opt);
    EXPECT_NEAR(std::abs(tr.x.back()(0) - cd(1.0, 0.0)), 0.0, 1e-10);
}

TEST(IntegrateLinear, ZeroGeneratorKeepsState) {
    std::mt19937_64 rng(41);
    const ComplexVector x0 = random_state(4, rng);
    const Trajectory tr = integrate_linear(matrix_generator(ComplexMatrix(ComplexMatrix::Zero(4, 4))), x0,
                                           {0.0, 0.5, 1.0, 10.0});
    ASSERT_EQ(tr.x.size(), 4u);
    for (const auto& x : tr.x) EXPECT_EQ((x - x0).norm(), 0.0);
}

TEST(IntegrateLinear, RabiBlockFullReturnAtPiOverG) {
    // x = (cos gt, -sin gt) by hand; at t = pi/g the population is back in
    // the first component with a sign flip.
    const double g = 1.3;
    ComplexMatrix a(2, 2);
    a << 0.0, g, -g, 0.0;
    ComplexVector x0(2);
    x0 << 1.0, 0.0;
    IntegratorOptions opt;
    opt.max_step = 1e-3;
    const std::vector<double> grid{0.0, 0.25 * kPi / g, kPi / g};
    const Trajectory tr = integrate_linear(matrix_generator(a), x0, grid, opt);
    EXPECT_NEAR(std::norm(tr.x.back()(0)), 1.0, 1e-10);
    EXPECT_NEAR(tr.x.back()(0).real(), -1.0, 1e-10);
    EXPECT_NEAR(tr.x[1](0).real(), std::cos(0.25 * kPi), 1e-10);
    EXPECT_NEAR(tr.x[1](1).real(), -std::sin(0.25 * kPi), 1e-10);
}

TEST(IntegrateLinear, RejectsNonIncreasingGrid) {
    ComplexVector x0(1);
    x0 << 1.0;
    const auto rhs = matrix_generator(ComplexMatrix(ComplexMatrix::Zero(1, 1)));
    EXPECT_THROW(integrate_linear(rhs, x0, {0.0, 1.0, 1.0}), std::invalid_argument);
    EXPECT_THROW(integrate_linear(rhs, x0, {0.0, -1.0}), std::invalid_argument);
    EXPECT_THROW(integrate_linear(rhs, x0, std::vector<double>{}), std::invalid_argument);
}

TEST(IntegrateLinear, RejectsStepAboveStabilityBound) {
    ComplexVector x0(1);
    x0 << 1.0;
    IntegratorOptions opt;
    opt.max_step = 0.1;
    opt.stability_bound = 0.05;
    EXPECT_THROW(integrate_linear(matrix_generator(ComplexMatrix(ComplexMatrix::Zero(1, 1))), x0, {0.0, 1.0}, opt),
                 std::invalid_argument);
    opt.stability_bound = 0.2;
    EXPECT_NO_THROW(
        integrate_linear(matrix_generator(ComplexMatrix(ComplexMatrix::Zero(1, 1))), x0, {0.0, 1.0}, opt));
}

TEST(IntegrateLinear, StepsNeverStraddleSwitchTime) {
    // The generator records every evaluation time with its piece; any
    // evaluation strictly after the switch in piece 0 (or before it in piece 1)
    // would mean a step crossed it.
    const double t_switch = 0.537;
    bool crossed = false;
    std::size_t max_piece = 0;
    LinearGenerator rhs = [&](double t, std::size_t piece, const ComplexVector& x,
                              ComplexVector& dx) {
        if (piece == 0 && t > t_switch + 1e-15) crossed = true;
        if (piece == 1 && t < t_switch - 1e-15) crossed = true;
        max_piece = std::max(max_piece, piece);
        dx = (piece == 0 ? cd(0.0, -1.0) : cd(0.0, 1.0)) * x;
    };
    ComplexVector x0(1);
    x0 << 1.0;
    IntegratorOptions opt;
    opt.max_step = 0.1;
    opt.switch_times = {t_switch};
    const Trajectory tr = integrate_linear(rhs, x0, {0.0, 1.0}, opt);
    EXPECT_FALSE(crossed);
    EXPECT_EQ(max_piece, 1u);
    // Phase forward for t_switch, backward for 1 - t_switch.
    const cd expected = std::polar(1.0, -t_switch + (1.0 - t_switch));
    EXPECT_NEAR(std::abs(tr.x.back()(0) - expected), 0.0, 1e-7);
}

TEST(IntegrateLinear, ObserverSeesEveryGridPoint) {
    ComplexVector x0(1);
    x0 << 1.0;
    std::vector<double> seen;
    integrate_linear(matrix_generator(ComplexMatrix(ComplexMatrix::Zero(1, 1))), x0, {0.0, 0.2, 0.7},
                     IntegratorOptions{}, [&](std::size_t, double t, const ComplexVector&) {
                         seen.push_back(t);
                     });
    EXPECT_EQ(seen, (std::vector<double>{0.0, 0.2, 0.7}));
}

TEST(IntegrateLinearProperty, FourthOrderConvergence) {
    std::mt19937_64 rng(43);
    const ComplexMatrix h = random_hermitian(5, rng);
    const ComplexVector x0 = random_state(5, rng);
    const double t_end = 2.0;
    const ComplexVector exact = HermitianPropagator(h).evolve(x0, t_end);
    const ComplexMatrix a = cd(0.0, -1.0) * h;
    double prev = 0.0;
    for (double step : {0.04, 0.02, 0.01}) {
        IntegratorOptions opt;
        opt.max_step = step;
        const Trajectory tr = integrate_linear(matrix_generator(a), x0, {0.0, t_end}, opt);
        const double err = (tr.x.back() - exact).norm();
        if (prev > 0.0) EXPECT_GE(prev / err, 8.0) << "step " << step;
        prev = err;
    }
}
