// Photon-echo quantum memory node: impedance/spectral matching, storage
// efficiency, single-excitation storage and echo simulation, self modes.

#pragma once

#include "cqed/numerics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cqed::memory {

/// Rates in rad/s (or any consistent inverse-time unit). Dynamics run in the
/// frame rotating at omega_o, which is kept for bookkeeping only.
struct MemoryCircuitParams {
    double gamma1 = 0.0;    // cavity <-> waveguide
    double gamma2 = 0.0;    // cavity <-> free-space loss
    double Gamma = 0.0;     // ensemble <-> cavity, N_qm |g|^2 / Delta_in
    double Delta_in = 1.0;  // inhomogeneous width; Lorentzian line of HWHM Delta_in / 2
    double omega_o = 0.0;

    std::optional<double> N_qm;
    std::optional<double> g_sigma;

    /// Throws std::invalid_argument on negative rates, Delta_in <= 0, or
    /// (N_qm, g_sigma) inconsistent with Gamma.
    void validate() const;

    static MemoryCircuitParams from_atoms(double gamma1, double gamma2, double n_qm,
                                          double g_sigma, double delta_in);
};

double qeff_point(const MemoryCircuitParams& p);

/// 4 g1 G / (g1 + g2 + G)^2, the reduced form of qeff_point.
double qeff_point_reduced(const MemoryCircuitParams& p);

struct MatchingReport {
    bool impedance_matched = false;
    bool spectrally_matched = false;
    double impedance_residual = 0.0;  // (Gamma - gamma1) / gamma1
    double spectral_residual = 0.0;   // (2 Delta_in - gamma1) / gamma1
};

MatchingReport matching_check(const MemoryCircuitParams& p, double tol = 1e-9);

/// Line-center-resolved storage efficiency eta(delta) for a monochromatic
/// input detuned by delta from the carrier.
double qeff_detuned(const MemoryCircuitParams& p, double delta);

/// Storage efficiency averaged over a Lorentzian input spectrum of FWHM
/// delta_omega (unit area). delta_omega = 0 gives qeff_point.
double qeff_spectral(const MemoryCircuitParams& p, double delta_omega, double abs_tol = 1e-9);

// ---------------------------------------------------------------------------

struct SpinEnsembleDiscretization {
    std::vector<double> detunings;  // Delta_j
    std::vector<double> couplings;  // g_j >= 0

    std::size_t n_spins() const { return detunings.size(); }
    double total_coupling() const;  // sum g_j^2
    double max_abs_detuning() const;

    /// Weights nonnegative, detunings finite, sizes consistent.
    void validate() const;
};

/// Equal-probability quantile sampling of the Lorentzian line (HWHM
/// Delta_in / 2) truncated at +-truncation * Delta_in, uniform couplings. The
/// total coupling is set so the in-band spectral density reproduces Gamma as
/// the cavity damping rate at line center.
SpinEnsembleDiscretization lorentzian_ensemble(std::size_t n_spins, const MemoryCircuitParams& p,
                                               double truncation = 20.0);

/// Same detunings with every coupling set to zero.
SpinEnsembleDiscretization uncoupled(const SpinEnsembleDiscretization& ens);

/// Compares the ensemble's weighted detuning distribution against the
/// truncated Lorentzian: weighted mean (in units of Delta_in) and the weight
/// fraction inside the half-width. Returns the larger deviation.
double lorentzian_shape_error(const SpinEnsembleDiscretization& ens, const MemoryCircuitParams& p,
                              double truncation = 20.0);

// ---------------------------------------------------------------------------

struct FieldEnvelope {
    std::vector<double> t;       // uniform grid
    std::vector<cd> samples;     // sqrt(photons / time)

    std::size_t size() const { return t.size(); }
    double dt() const;
    double energy() const;  // sum |E|^2 dt
    void validate() const;

    static FieldEnvelope zeros(std::vector<double> t);
};

std::vector<double> uniform_grid(double t0, double t1, double dt);

/// exp(-(t - t0)^2 / (2 sigma^2)) exp(-i offset t), with sigma chosen so the
/// power spectrum has FWHM delta_omega.
FieldEnvelope gaussian_pulse(const std::vector<double>& t, double t0, double delta_omega,
                             double amplitude = 1.0, double carrier_offset = 0.0);

double gaussian_sigma_for_fwhm(double delta_omega);

/// |sum E(t) exp(i w t) dt| at each requested w (continuous-time transform
/// by direct summation; a component exp(-i w0 t) peaks at w = w0).
std::vector<double> spectrum_magnitude(const FieldEnvelope& f, const std::vector<double>& omegas);

/// Spectral centroid of the envelope relative to the carrier.
double spectral_centroid(const FieldEnvelope& f);

/// Intensity-weighted RMS duration.
double rms_duration(const FieldEnvelope& f);

struct StorageOptions {
    double max_step = 0.0;          // <= 0: chosen from max detuning and grid
    double coherence_window = 0.0;  // T2; <= 0 means not asserted
};

struct StorageTrace {
    FieldEnvelope input;
    std::vector<double> t;
    std::vector<cd> cavity_amp;
    FieldEnvelope out_field;
    std::vector<double> reflected_cumulative;  // fractions of input energy
    std::vector<double> lost_cumulative;

    ComplexVector final_spins;
    cd final_cavity{0.0, 0.0};

    double input_energy = 0.0;
    double absorbed_fraction = 0.0;  // spins + cavity at window end
    double spin_fraction = 0.0;      // spins only
    double reflected_fraction = 0.0;
    double lost_fraction = 0.0;
    bool degenerate_input = false;
    std::vector<std::string> warnings;

    double balance_error() const {
        return std::abs(absorbed_fraction + reflected_fraction + lost_fraction -
                        (degenerate_input ? 0.0 : 1.0));
    }
};

/// Integrates the cavity + spin single-excitation equations over the input's grid:
///   da/dt   = -(g1+g2)/2 a + sum_j g_j s_j + sqrt(g1) E_in(t)
///   ds_j/dt = -i Delta_j s_j - g_j a
///   E_out   = sqrt(g1) a - E_in
StorageTrace simulate_storage(const SpinEnsembleDiscretization& ens, const MemoryCircuitParams& p,
                              const FieldEnvelope& input, const StorageOptions& opt = {});

struct EchoOptions {
    double t_end = 0.0;     // <= 0: mirror of the storage window about t_prime
    double dt = 0.0;        // <= 0: input grid spacing
    double max_step = 0.0;  // <= 0: as in simulate_storage
};

struct EchoResult {
    FieldEnvelope echo;             // emitted field for t >= t_prime
    double efficiency = 0.0;        // echo energy / input energy
    double pre_flip_fraction = 0.0; // emitted between window end and t_prime
    double peak_time = 0.0;         // argmax |E|^2 with parabolic refinement
    double centroid_time = 0.0;     // intensity-weighted mean time
    double mirror_rms = 0.0;        // spectrum inversion residual
};

/// Continues the storage trace with E_in = 0, reverses every detuning at
/// t_prime and records the emitted echo.
EchoResult echo_retrieve(const StorageTrace& trace, const SpinEnsembleDiscretization& ens,
                         const MemoryCircuitParams& p, double t_prime, const EchoOptions& opt = {});

/// sqrt(sum (|Xout(-w)| - |Xin(w)|)^2 / sum |Xin(w)|^2) after normalizing both
/// spectra to unit norm, over a band around the input centroid.
double spectrum_mirror_error(const FieldEnvelope& input, const FieldEnvelope& output,
                             std::size_t points = 201);

/// Time of maximum intensity, refined by a parabola through the three samples
/// around the discrete maximum.
double peak_time(const FieldEnvelope& f);
double centroid_time(const FieldEnvelope& f);

// ---------------------------------------------------------------------------

struct SelfMode {
    FieldEnvelope envelope;
    double S = 0.0;
    std::size_t domain_end = 0;  // first index with t >= 2 t_k
};

/// E(t) = E_o exp(-Gamma |t - 2 t_k| / 2) sin(S (t - 2 t_k)) / S with
/// S = sqrt(N|g|^2 - (Gamma/2)^2), evaluated on the whole grid.
SelfMode self_mode(double n_eff_g2, double Gamma, double t_k, double e_o,
                   const std::vector<double>& t_grid);

}  // namespace cqed::memory
