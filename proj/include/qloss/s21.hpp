#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace qloss {

/// Seven-parameter inverse-transmission model. The electronic pathlength
/// phase is parameterized per unit frequency (cable delay); a constant term
/// would be degenerate with the global phase.
struct S21Params {
    double f0 = 0.0;              // resonance frequency, Hz
    double q_i = 0.0;             // internal quality factor
    double q_c = 0.0;             // coupling quality factor
    double phi = 0.0;             // coupling asymmetry phase, rad, (-pi, pi]
    double amp = 1.0;             // absolute amplitude A
    double global_phase = 0.0;    // theta, rad
    double path_phase_rate = 0.0; // rad/Hz

    void validate() const;
};

/// One complex transmission sweep at fixed bath temperature and drive power.
struct Spectrum {
    std::vector<double> freqs;              // Hz, strictly increasing
    std::vector<std::complex<double>> s21;  // same length
    double t_bath = 0.0;                    // K
    double p_in_dbm = 0.0;                  // dBm at chip

    void validate() const;
};

struct ExtractionResult {
    S21Params params;
    S21Params uncertainties; // per-parameter standard errors, same layout
    double residual_rms = 0.0;
    double n_photon = 0.0;
};

/// Extraction result together with the sweep conditions it came from.
struct ExtractionRecord {
    ExtractionResult result;
    double t_bath = 0.0;
    double p_in_dbm = 0.0;
    std::string source;
};

struct QcPooling {
    double qc0 = 0.0;                 // pooled coupling quality factor
    std::vector<std::size_t> window;  // record indices that qualified
    // Every spectrum is to be refit with q_c frozen at qc0 (six free
    // parameters); kept explicit so callers can audit the pass.
    bool refit_all = true;
};

/// Inverse transmission model evaluated at frequency f.
std::complex<double> model_s21_inv(double f, const S21Params& p);

/// Forward model plus independent complex Gaussian noise (noise_sigma per
/// quadrature), reproducible from the seed. The normal deviates are generated
/// by an internal Box-Muller transform so spectra are bit-identical across
/// standard libraries.
Spectrum synth_spectrum(const S21Params& p, std::vector<double> f_grid, double noise_sigma,
                        std::uint64_t seed);

/// Seven-parameter extraction: wing normalization, algebraic circle fit in
/// the inverse plane, phase-frequency fit, then full nonlinear refinement.
ExtractionResult extract_resonator_params(const Spectrum& sp);

/// Same pipeline with the coupling Q frozen (pooled-Q_C refit pass).
ExtractionResult extract_resonator_params_fixed_qc(const Spectrum& sp, double qc0);

/// Pools Q_C over the high-power, low-temperature window (n_p > 1e3 and
/// T_b < 0.1 Tc) as the median of the extracted values.
QcPooling pool_qc(const std::vector<ExtractionRecord>& records, double tc);

/// Average photon number, Eq. form 2/(hbar w^2) (Q_I^2 / Q_C) P_in.
double photon_number(double p_in_watts, double f_r, double q_i, double q_c);

} // namespace qloss
