#include "cqed/memory.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cqed::memory {

namespace {

void require_nonnegative(double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
        std::ostringstream msg;
        msg << name << " must be finite and nonnegative (got " << v << ")";
        throw std::invalid_argument(msg.str());
    }
}

}  // namespace

void MemoryCircuitParams::validate() const {
    require_nonnegative(gamma1, "gamma1");
    require_nonnegative(gamma2, "gamma2");
    require_nonnegative(Gamma, "Gamma");
    if (!(Delta_in > 0.0) || !std::isfinite(Delta_in)) {
        throw std::invalid_argument("Delta_in must be positive");
    }
    if (N_qm.has_value() != g_sigma.has_value()) {
        throw std::invalid_argument("N_qm and g_sigma must be supplied together");
    }
    if (N_qm) {
        const double derived = *N_qm * (*g_sigma) * (*g_sigma) / Delta_in;
        const double scale = std::max(std::abs(Gamma), std::abs(derived));
        if (std::abs(derived - Gamma) > 1e-12 * scale) {
            std::ostringstream msg;
            msg << "N_qm |g_sigma|^2 / Delta_in = " << derived << " does not reproduce Gamma = "
                << Gamma;
            throw std::invalid_argument(msg.str());
        }
    }
}

MemoryCircuitParams MemoryCircuitParams::from_atoms(double gamma1, double gamma2, double n_qm,
                                                    double g_sigma, double delta_in) {
    MemoryCircuitParams p;
    p.gamma1 = gamma1;
    p.gamma2 = gamma2;
    p.Delta_in = delta_in;
    p.Gamma = n_qm * g_sigma * g_sigma / delta_in;
    p.N_qm = n_qm;
    p.g_sigma = g_sigma;
    p.validate();
    return p;
}

double qeff_point(const MemoryCircuitParams& p) {
    p.validate();
    const double total = p.gamma1 + p.gamma2 + p.Gamma;
    if (!(total > 0.0)) {
        throw std::invalid_argument("qeff_point: gamma1 + gamma2 + Gamma must be positive");
    }
    const double cavity = p.gamma1 + p.gamma2;
    if (cavity == 0.0) return 0.0;  // no waveguide coupling
    const double x = p.Gamma / cavity;
    return (p.gamma1 / cavity) * (4.0 * x) / ((1.0 + x) * (1.0 + x));
}

double qeff_point_reduced(const MemoryCircuitParams& p) {
    const double total = p.gamma1 + p.gamma2 + p.Gamma;
    return 4.0 * p.gamma1 * p.Gamma / (total * total);
}

MatchingReport matching_check(const MemoryCircuitParams& p, double tol) {
    p.validate();
    if (p.gamma1 == 0.0) {
        throw std::invalid_argument(
            "matching_check: gamma1 = 0 (no waveguide coupling), matching undefined");
    }
    MatchingReport r;
    r.impedance_residual = (p.Gamma - p.gamma1) / p.gamma1;
    r.spectral_residual = (2.0 * p.Delta_in - p.gamma1) / p.gamma1;
    r.impedance_matched = std::abs(r.impedance_residual) <= tol;
    r.spectrally_matched = std::abs(r.spectral_residual) <= tol;
    return r;
}

double qeff_detuned(const MemoryCircuitParams& p, double delta) {
    const cd self_energy = p.Gamma / cd(1.0, -2.0 * delta / p.Delta_in);
    const cd denom = cd(0.0, -delta) + 0.5 * (p.gamma1 + p.gamma2 + self_energy);
    const double d2 = std::norm(denom);
    if (d2 == 0.0) return 0.0;
    return p.gamma1 * self_energy.real() / d2;
}

double qeff_spectral(const MemoryCircuitParams& p, double delta_omega, double abs_tol) {
    p.validate();
    if (!(delta_omega >= 0.0) || !std::isfinite(delta_omega)) {
        throw std::invalid_argument("qeff_spectral: delta_omega must be finite and >= 0");
    }
    if (delta_omega == 0.0) return qeff_point(p);
    if (p.gamma1 + p.gamma2 + p.Gamma == 0.0) {
        throw std::invalid_argument("qeff_spectral: gamma1 + gamma2 + Gamma must be positive");
    }
    // delta = hwhm * tan(theta) maps the Lorentzian measure onto d(theta) / pi.
    const double hwhm = 0.5 * delta_omega;
    auto integrand = [&](double theta) {
        return qeff_detuned(p, hwhm * std::tan(theta)) / kPi;
    };
    // Split at the line features so the adaptive rule sees them even when the
    // input is much narrower or broader than the atomic line.
    std::vector<double> cuts{-0.5 * kPi, 0.5 * kPi, 0.0};
    for (double scale : {p.Delta_in, p.gamma1 + p.gamma2 + p.Gamma}) {
        const double th = std::atan(scale / hwhm);
        cuts.push_back(th);
        cuts.push_back(-th);
    }
    std::sort(cuts.begin(), cuts.end());
    double sum = 0.0;
    for (std::size_t i = 1; i < cuts.size(); ++i) {
        if (cuts[i] - cuts[i - 1] <= 0.0) continue;
        double err = 0.0;
        sum += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
            integrand, cuts[i - 1], cuts[i], 15, abs_tol * 1e-3, &err);
    }
    return sum;
}

// ---------------------------------------------------------------------------

double SpinEnsembleDiscretization::total_coupling() const {
    double s = 0.0;
    for (double g : couplings) s += g * g;
    return s;
}

double SpinEnsembleDiscretization::max_abs_detuning() const {
    double m = 0.0;
    for (double d : detunings) m = std::max(m, std::abs(d));
    return m;
}

void SpinEnsembleDiscretization::validate() const {
    if (detunings.size() != couplings.size()) {
        throw std::invalid_argument("ensemble: detunings and couplings differ in length");
    }
    for (std::size_t j = 0; j < detunings.size(); ++j) {
        if (!std::isfinite(detunings[j])) {
            throw std::invalid_argument("ensemble: non-finite detuning");
        }
        if (!(couplings[j] >= 0.0) || !std::isfinite(couplings[j])) {
            throw std::invalid_argument("ensemble: couplings must be finite and nonnegative");
        }
    }
}

SpinEnsembleDiscretization lorentzian_ensemble(std::size_t n_spins, const MemoryCircuitParams& p,
                                               double truncation) {
    p.validate();
    if (n_spins == 0) {
        throw std::invalid_argument("lorentzian_ensemble: n_spins must be positive");
    }
    if (!(truncation > 0.0)) {
        throw std::invalid_argument("lorentzian_ensemble: truncation must be positive");
    }
    const double hwhm = 0.5 * p.Delta_in;
    const double theta_max = std::atan(truncation * p.Delta_in / hwhm);
    const double retained = 2.0 * theta_max / kPi;
    // Continuum limit: sum g_j^2 delta(D - D_j) -> (Gamma Delta_in / 4) L(D).
    const double total = 0.25 * p.Gamma * p.Delta_in * retained;
    const double g = std::sqrt(total / static_cast<double>(n_spins));

    SpinEnsembleDiscretization ens;
    ens.detunings.resize(n_spins);
    ens.couplings.assign(n_spins, g);
    const double dtheta = 2.0 * theta_max / static_cast<double>(n_spins);
    for (std::size_t j = 0; j < n_spins; ++j) {
        const double theta = -theta_max + (static_cast<double>(j) + 0.5) * dtheta;
        ens.detunings[j] = hwhm * std::tan(theta);
    }
    return ens;
}

SpinEnsembleDiscretization uncoupled(const SpinEnsembleDiscretization& ens) {
    SpinEnsembleDiscretization out = ens;
    std::fill(out.couplings.begin(), out.couplings.end(), 0.0);
    return out;
}

double lorentzian_shape_error(const SpinEnsembleDiscretization& ens, const MemoryCircuitParams& p,
                              double truncation) {
    ens.validate();
    const double total = ens.total_coupling();
    if (total == 0.0) return 0.0;
    const double hwhm = 0.5 * p.Delta_in;
    double mean = 0.0;
    double inside = 0.0;
    for (std::size_t j = 0; j < ens.n_spins(); ++j) {
        const double w = ens.couplings[j] * ens.couplings[j] / total;
        mean += w * ens.detunings[j];
        if (std::abs(ens.detunings[j]) <= hwhm) inside += w;
    }
    const double theta_max = std::atan(truncation * p.Delta_in / hwhm);
    const double expected_inside = (kPi / 4.0) / theta_max;
    return std::max(std::abs(mean) / p.Delta_in, std::abs(inside - expected_inside));
}

// ---------------------------------------------------------------------------

double FieldEnvelope::dt() const {
    if (t.size() < 2) throw std::invalid_argument("FieldEnvelope: need at least two samples");
    return (t.back() - t.front()) / static_cast<double>(t.size() - 1);
}

double FieldEnvelope::energy() const {
    if (t.size() < 2) return 0.0;
    double e = 0.0;
    for (const cd& s : samples) e += std::norm(s);
    return e * dt();
}

void FieldEnvelope::validate() const {
    if (t.size() != samples.size()) {
        throw std::invalid_argument("FieldEnvelope: time grid and samples differ in length");
    }
    if (t.size() < 2) {
        throw std::invalid_argument("FieldEnvelope: need at least two samples");
    }
    const double h = dt();
    if (!(h > 0.0)) throw std::invalid_argument("FieldEnvelope: grid must be increasing");
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (std::abs((t[i] - t[i - 1]) - h) > 1e-6 * h) {
            throw std::invalid_argument("FieldEnvelope: grid must be uniform");
        }
    }
    for (const cd& s : samples) {
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) {
            throw std::invalid_argument("FieldEnvelope: non-finite sample");
        }
    }
}

FieldEnvelope FieldEnvelope::zeros(std::vector<double> t) {
    FieldEnvelope f;
    f.samples.assign(t.size(), cd(0.0, 0.0));
    f.t = std::move(t);
    return f;
}

std::vector<double> uniform_grid(double t0, double t1, double dt) {
    if (!(dt > 0.0) || !(t1 > t0)) {
        throw std::invalid_argument("uniform_grid: need t1 > t0 and dt > 0");
    }
    const auto n = static_cast<std::size_t>(std::llround((t1 - t0) / dt));
    std::vector<double> t(n + 1);
    for (std::size_t i = 0; i <= n; ++i) t[i] = t0 + static_cast<double>(i) * dt;
    return t;
}

double gaussian_sigma_for_fwhm(double delta_omega) {
    if (!(delta_omega > 0.0)) {
        throw std::invalid_argument("gaussian pulse: spectral width must be positive");
    }
    // |X(w)|^2 ~ exp(-w^2 sigma^2)
    return 2.0 * std::sqrt(std::log(2.0)) / delta_omega;
}

FieldEnvelope gaussian_pulse(const std::vector<double>& t, double t0, double delta_omega,
                             double amplitude, double carrier_offset) {
    const double sigma = gaussian_sigma_for_fwhm(delta_omega);
    FieldEnvelope f;
    f.t = t;
    f.samples.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double x = (t[i] - t0) / sigma;
        f.samples[i] = amplitude * std::exp(-0.5 * x * x) * std::polar(1.0, -carrier_offset * t[i]);
    }
    return f;
}

std::vector<double> spectrum_magnitude(const FieldEnvelope& f, const std::vector<double>& omegas) {
    const double h = f.dt();
    std::vector<double> out(omegas.size());
    for (std::size_t k = 0; k < omegas.size(); ++k) {
        // Rotate incrementally; re-anchor periodically to bound phase drift.
        cd acc(0.0, 0.0);
        const cd step = std::polar(1.0, omegas[k] * h);
        cd phase = std::polar(1.0, omegas[k] * f.t.front());
        for (std::size_t i = 0; i < f.samples.size(); ++i) {
            if (i % 1024 == 0) phase = std::polar(1.0, omegas[k] * f.t[i]);
            acc += f.samples[i] * phase;
            phase *= step;
        }
        out[k] = std::abs(acc) * h;
    }
    return out;
}

double spectral_centroid(const FieldEnvelope& f) {
    cd acc(0.0, 0.0);
    for (std::size_t i = 1; i < f.samples.size(); ++i) {
        acc += std::conj(f.samples[i - 1]) * f.samples[i];
    }
    if (acc == cd(0.0, 0.0)) return 0.0;
    return -std::arg(acc) / f.dt();
}

double rms_duration(const FieldEnvelope& f) {
    double w = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double p = std::norm(f.samples[i]);
        w += p;
        m1 += p * f.t[i];
        m2 += p * f.t[i] * f.t[i];
    }
    if (w == 0.0) return 0.0;
    m1 /= w;
    return std::sqrt(std::max(0.0, m2 / w - m1 * m1));
}

double peak_time(const FieldEnvelope& f) {
    if (f.size() == 0) throw std::invalid_argument("peak_time: empty envelope");
    std::size_t best = 0;
    for (std::size_t i = 1; i < f.size(); ++i) {
        if (std::norm(f.samples[i]) > std::norm(f.samples[best])) best = i;
    }
    if (best == 0 || best + 1 >= f.size()) return f.t[best];
    const double y0 = std::norm(f.samples[best - 1]);
    const double y1 = std::norm(f.samples[best]);
    const double y2 = std::norm(f.samples[best + 1]);
    const double curv = y0 - 2.0 * y1 + y2;
    if (curv >= 0.0) return f.t[best];
    const double shift = 0.5 * (y0 - y2) / curv;
    return f.t[best] + std::clamp(shift, -0.5, 0.5) * f.dt();
}

double centroid_time(const FieldEnvelope& f) {
    double w = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double p = std::norm(f.samples[i]);
        w += p;
        m1 += p * f.t[i];
    }
    return w == 0.0 ? 0.0 : m1 / w;
}

double spectrum_mirror_error(const FieldEnvelope& input, const FieldEnvelope& output,
                             std::size_t points) {
    if (points < 3) throw std::invalid_argument("spectrum_mirror_error: need >= 3 points");
    const double tau = rms_duration(input);
    if (tau == 0.0) throw std::invalid_argument("spectrum_mirror_error: empty input");
    const double center = spectral_centroid(input);
    const double half_band = 3.0 / tau;
    std::vector<double> w_in(points), w_out(points);
    for (std::size_t k = 0; k < points; ++k) {
        const double w = center - half_band + 2.0 * half_band * static_cast<double>(k) /
                                                  static_cast<double>(points - 1);
        w_in[k] = w;
        w_out[k] = -w;
    }
    auto a = spectrum_magnitude(input, w_in);
    auto b = spectrum_magnitude(output, w_out);
    auto normalize = [](std::vector<double>& v) {
        double n = 0.0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        if (n > 0.0) {
            for (double& x : v) x /= n;
        }
    };
    normalize(a);
    normalize(b);
    double num = 0.0;
    for (std::size_t k = 0; k < points; ++k) num += (b[k] - a[k]) * (b[k] - a[k]);
    return std::sqrt(num);
}

// ---------------------------------------------------------------------------

namespace {

// Catmull-Rom interpolation of the input envelope; zero outside its grid.
class InputInterpolant {
public:
    explicit InputInterpolant(const FieldEnvelope* f) : f_(f) {
        if (f_ && f_->size() >= 2) {
            t0_ = f_->t.front();
            h_ = f_->dt();
        }
    }

    cd operator()(double t) const {
        if (!f_ || f_->size() < 2) return {0.0, 0.0};
        const double u = (t - t0_) / h_;
        const auto last = static_cast<double>(f_->size() - 1);
        if (u < -1e-9 || u > last + 1e-9) return {0.0, 0.0};
        auto i = static_cast<std::ptrdiff_t>(std::floor(u));
        i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(f_->size()) - 2);
        const double s = u - static_cast<double>(i);
        const cd p1 = at(i), p2 = at(i + 1);
        const cd p0 = i > 0 ? at(i - 1) : 2.0 * p1 - p2;
        const cd p3 = i + 2 < static_cast<std::ptrdiff_t>(f_->size()) ? at(i + 2) : 2.0 * p2 - p1;
        const double s2 = s * s, s3 = s2 * s;
        return 0.5 * ((2.0 * p1) + (-p0 + p2) * s + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s2 +
                      (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * s3);
    }

private:
    cd at(std::ptrdiff_t i) const { return f_->samples[static_cast<std::size_t>(i)]; }

    const FieldEnvelope* f_ = nullptr;
    double t0_ = 0.0;
    double h_ = 1.0;
};

// State layout: [a, s_1..s_n, reflected, lost, incoming]; the last three
// accumulate energies so the balance is integrated with the same scheme.
class MemoryDynamics {
public:
    MemoryDynamics(const SpinEnsembleDiscretization& ens, const MemoryCircuitParams& p,
                   const FieldEnvelope* input, std::size_t flip_piece)
        : n_(static_cast<Eigen::Index>(ens.n_spins())),
          half_cavity_(0.5 * (p.gamma1 + p.gamma2)),
          sqrt_g1_(std::sqrt(p.gamma1)),
          gamma2_(p.gamma2),
          input_(input),
          flip_piece_(flip_piece) {
        rotation_.resize(n_);
        coupling_.resize(n_);
        for (Eigen::Index j = 0; j < n_; ++j) {
            rotation_(j) = cd(0.0, -ens.detunings[static_cast<std::size_t>(j)]);
            coupling_(j) = ens.couplings[static_cast<std::size_t>(j)];
        }
    }

    Eigen::Index size() const { return n_ + 4; }
    Eigen::Index reflected_index() const { return n_ + 1; }
    Eigen::Index lost_index() const { return n_ + 2; }
    Eigen::Index incoming_index() const { return n_ + 3; }

    cd input_at(double t) const { return input_(t); }
    cd output(const ComplexVector& x, double t) const { return sqrt_g1_ * x(0) - input_(t); }

    void operator()(double t, std::size_t piece, const ComplexVector& x, ComplexVector& dx) const {
        const double sign = piece >= flip_piece_ ? -1.0 : 1.0;
        const cd a = x(0);
        const cd e_in = input_(t);
        const auto s = x.segment(1, n_).array();
        dx(0) = -half_cavity_ * a + (coupling_ * s).sum() + sqrt_g1_ * e_in;
        dx.segment(1, n_).array() = (sign * rotation_) * s - coupling_ * a;
        const cd e_out = sqrt_g1_ * a - e_in;
        dx(n_ + 1) = std::norm(e_out);
        dx(n_ + 2) = gamma2_ * std::norm(a);
        dx(n_ + 3) = std::norm(e_in);
    }

private:
    Eigen::Index n_;
    double half_cavity_;
    double sqrt_g1_;
    double gamma2_;
    InputInterpolant input_;
    std::size_t flip_piece_;
    Eigen::ArrayXcd rotation_;  // -i Delta_j
    Eigen::ArrayXd coupling_;
};

double default_max_step(const SpinEnsembleDiscretization& ens, const MemoryCircuitParams& p,
                        double grid_dt) {
    const double rate = std::max({ens.max_abs_detuning(), 0.5 * (p.gamma1 + p.gamma2),
                                  std::sqrt(ens.total_coupling())});
    if (rate == 0.0) return grid_dt;
    return std::min(grid_dt, 0.25 / rate);
}

double stability_bound(const SpinEnsembleDiscretization& ens, const MemoryCircuitParams& p) {
    const double rate = ens.max_abs_detuning() + 0.5 * (p.gamma1 + p.gamma2) +
                        std::sqrt(ens.total_coupling());
    // RK4 is stable on the imaginary axis up to 2*sqrt(2).
    return rate > 0.0 ? 2.8 / rate : 0.0;
}

}  // namespace

StorageTrace simulate_storage(const SpinEnsembleDiscretization& ens, const MemoryCircuitParams& p,
                              const FieldEnvelope& input, const StorageOptions& opt) {
    p.validate();
    ens.validate();
    input.validate();
    if (p.Gamma > 0.0 && ens.n_spins() == 0) {
        throw std::invalid_argument(
            "simulate_storage: empty ensemble is inconsistent with Gamma > 0");
    }

    StorageTrace tr;
    tr.input = input;
    const double duration = input.t.back() - input.t.front();
    if (opt.coherence_window > 0.0) {
        if (duration >= opt.coherence_window) {
            throw std::invalid_argument(
                "simulate_storage: storage window is not shorter than the coherence window");
        }
        if (duration > 0.1 * opt.coherence_window) {
            tr.warnings.emplace_back("storage window exceeds 10% of the coherence window");
        }
    }
    const double in_energy = input.energy();
    if (in_energy > 0.0) {
        const double tau = rms_duration(input);
        // RMS spectral width of a transform-limited pulse ~ 1 / (2 tau).
        if (tau > 0.0 && 1.0 / (2.0 * tau) > 0.2 * p.Delta_in) {
            tr.warnings.emplace_back("input spectral width is not small compared to Delta_in");
        }
    }

    MemoryDynamics dyn(ens, p, &input, std::numeric_limits<std::size_t>::max());
    ComplexVector x0 = ComplexVector::Zero(dyn.size());

    IntegratorOptions iopt;
    iopt.max_step = opt.max_step > 0.0 ? opt.max_step : default_max_step(ens, p, input.dt());
    iopt.stability_bound = stability_bound(ens, p);

    const std::size_t n = input.size();
    tr.t = input.t;
    tr.cavity_amp.resize(n);
    tr.out_field.t = input.t;
    tr.out_field.samples.resize(n);
    tr.reflected_cumulative.resize(n);
    tr.lost_cumulative.resize(n);
    std::vector<double> incoming(n);

    LinearGenerator rhs = [&dyn](double t, std::size_t piece, const ComplexVector& x,
                                 ComplexVector& dx) { dyn(t, piece, x, dx); };
    const ComplexVector xf = integrate_linear(
        rhs, x0, input.t, iopt, [&](std::size_t i, double t, const ComplexVector& x) {
            tr.cavity_amp[i] = x(0);
            tr.out_field.samples[i] = dyn.output(x, t);
            tr.reflected_cumulative[i] = x(dyn.reflected_index()).real();
            tr.lost_cumulative[i] = x(dyn.lost_index()).real();
            incoming[i] = x(dyn.incoming_index()).real();
        });

    tr.final_cavity = xf(0);
    tr.final_spins = xf.segment(1, static_cast<Eigen::Index>(ens.n_spins()));
    tr.input_energy = incoming.back();
    const double spin_energy = tr.final_spins.squaredNorm();
    const double node_energy = spin_energy + std::norm(tr.final_cavity);

    if (!(tr.input_energy > 0.0)) {
        tr.degenerate_input = true;
        tr.warnings.emplace_back("zero-energy input: fractions set to 0");
        std::fill(tr.reflected_cumulative.begin(), tr.reflected_cumulative.end(), 0.0);
        std::fill(tr.lost_cumulative.begin(), tr.lost_cumulative.end(), 0.0);
        return tr;
    }
    for (std::size_t i = 0; i < n; ++i) {
        tr.reflected_cumulative[i] /= tr.input_energy;
        tr.lost_cumulative[i] /= tr.input_energy;
    }
    tr.absorbed_fraction = node_energy / tr.input_energy;
    tr.spin_fraction = spin_energy / tr.input_energy;
    tr.reflected_fraction = tr.reflected_cumulative.back();
    tr.lost_fraction = tr.lost_cumulative.back();
    return tr;
}

EchoResult echo_retrieve(const StorageTrace& trace, const SpinEnsembleDiscretization& ens,
                         const MemoryCircuitParams& p, double t_prime, const EchoOptions& opt) {
    p.validate();
    ens.validate();
    if (static_cast<std::size_t>(trace.final_spins.size()) != ens.n_spins()) {
        throw std::invalid_argument("echo_retrieve: trace and ensemble sizes differ");
    }
    const FieldEnvelope& in = trace.input;
    const double peak = [&] {
        double m = 0.0;
        for (const cd& s : in.samples) m = std::max(m, std::norm(s));
        return m;
    }();
    double support_end = in.t.front();
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (std::norm(in.samples[i]) > 1e-12 * peak) support_end = in.t[i];
    }
    if (peak > 0.0 && t_prime <= support_end) {
        std::ostringstream msg;
        msg << "echo_retrieve: t_prime = " << t_prime << " lies inside the input pulse (support ends at "
            << support_end << ")";
        throw std::invalid_argument(msg.str());
    }
    const double t_start = trace.t.back();
    if (t_prime < t_start) {
        std::ostringstream msg;
        msg << "echo_retrieve: t_prime = " << t_prime << " precedes the end of the storage window ("
            << t_start << ")";
        throw std::invalid_argument(msg.str());
    }
    const double dt = opt.dt > 0.0 ? opt.dt : in.dt();
    const double t_end = opt.t_end > 0.0 ? opt.t_end : 2.0 * t_prime - in.t.front();
    if (!(t_end > t_prime)) throw std::invalid_argument("echo_retrieve: t_end must exceed t_prime");

    std::vector<double> grid;
    if (t_prime > t_start) grid.push_back(t_start);
    const auto steps = static_cast<std::size_t>(std::ceil((t_end - t_prime) / dt - 1e-9));
    for (std::size_t k = 0; k <= steps; ++k) grid.push_back(t_prime + static_cast<double>(k) * dt);

    MemoryDynamics dyn(ens, p, nullptr, 1);
    ComplexVector x0 = ComplexVector::Zero(dyn.size());
    x0(0) = trace.final_cavity;
    x0.segment(1, trace.final_spins.size()) = trace.final_spins;

    IntegratorOptions iopt;
    iopt.max_step = opt.max_step > 0.0 ? opt.max_step : default_max_step(ens, p, dt);
    iopt.stability_bound = stability_bound(ens, p);
    iopt.switch_times = {t_prime};

    EchoResult res;
    res.echo.t.reserve(steps + 1);
    res.echo.samples.reserve(steps + 1);
    double emitted_before_flip = 0.0;
    LinearGenerator rhs = [&dyn](double t, std::size_t piece, const ComplexVector& x,
                                 ComplexVector& dx) { dyn(t, piece, x, dx); };
    const ComplexVector xf =
        integrate_linear(rhs, x0, grid, iopt, [&](std::size_t, double t, const ComplexVector& x) {
            if (t >= t_prime) {
                if (res.echo.t.empty()) emitted_before_flip = x(dyn.reflected_index()).real();
                res.echo.t.push_back(t);
                res.echo.samples.push_back(dyn.output(x, t));
            }
        });

    const double emitted_total = xf(dyn.reflected_index()).real();
    if (trace.input_energy > 0.0) {
        res.efficiency = (emitted_total - emitted_before_flip) / trace.input_energy;
        res.pre_flip_fraction = emitted_before_flip / trace.input_energy;
    }
    if (res.echo.energy() > 0.0) {
        res.peak_time = peak_time(res.echo);
        res.centroid_time = centroid_time(res.echo);
        if (in.energy() > 0.0) res.mirror_rms = spectrum_mirror_error(in, res.echo);
    }
    return res;
}

// ---------------------------------------------------------------------------

SelfMode self_mode(double n_eff_g2, double Gamma, double t_k, double e_o,
                   const std::vector<double>& t_grid) {
    const double disc = n_eff_g2 - 0.25 * Gamma * Gamma;
    if (!(disc > 0.0)) {
        std::ostringstream msg;
        msg << "self_mode: overdamped parameters, N|g|^2 - (Gamma/2)^2 = " << disc << " <= 0";
        throw std::invalid_argument(msg.str());
    }
    SelfMode m;
    m.S = std::sqrt(disc);
    m.envelope.t = t_grid;
    m.envelope.samples.resize(t_grid.size());
    const double peak = 2.0 * t_k;
    m.domain_end = t_grid.size();
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        const double u = t_grid[i] - peak;
        if (u >= 0.0 && m.domain_end == t_grid.size()) m.domain_end = i;
        m.envelope.samples[i] = e_o * std::exp(-0.5 * Gamma * std::abs(u)) * std::sin(m.S * u) / m.S;
    }
    return m;
}

}  // namespace cqed::memory
