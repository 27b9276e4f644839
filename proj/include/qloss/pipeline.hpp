#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "qloss/loss.hpp"
#include "qloss/materials.hpp"

namespace qloss {

struct PowerSeriesPoint {
    double n_photon = 0.0;
    double q_i = 0.0;
    double q_i_sigma = 0.0; // 0 means unknown; relative weighting is used
};

/// Q_I versus photon number at one bath temperature.
struct PowerSeries {
    double t_bath = 0.0;
    std::vector<PowerSeriesPoint> points;

    void validate() const; // >= 4 points spanning >= 2 decades, n_photon > 0
};

/// Four-parameter TLS-only power fit of one series.
struct TlsOnlyFit {
    double q_a = 0.0;
    double q_tls = 0.0;
    double n_c = 0.0;
    double alpha = 0.0;
    double residual_rms = 0.0; // relative, in inverse-Q space
    double q_a_sigma = 0.0, q_tls_sigma = 0.0, n_c_sigma = 0.0, alpha_sigma = 0.0;
    // Set when the TLS amplitude ran into its bound (power-independent data).
    bool no_tls_signature = false;
    // Measured photon-number span, kept for interpolation range checks.
    double np_min = 0.0, np_max = 0.0;
};

/// Weighted nonlinear least squares of 1/Q_I = 1/Q_A + (1/Q_TLS)/sqrt(1+(n/n_c)^a).
/// Bounds: Q_A in [1e5, 1e9], alpha in [0, 1], n_c in [1e-3, 1e6]; five
/// deterministic starts.
TlsOnlyFit fit_power_series(const PowerSeries& ps);

/// Evaluates the fitted power law on a photon-number grid. The grid must lie
/// within the measured span extended by one decade each way.
std::vector<std::pair<double, double>> interpolate_qi(const TlsOnlyFit& fit,
                                                      const std::vector<double>& np_grid);

struct FullFitConfig {
    double q_a = 2e7;   // held constant
    double i_ext = 0.0; // um^-3 s^-1, held constant; must be set
    std::vector<double> np_grid = {1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6};
    // Bounds of the joint fit.
    double s_lo = 1e-3, s_hi = 1e8;         // s^-1
    double kappa_lo = 1e-2, kappa_hi = 1e2;
    double q_tls_lo = 1e3, q_tls_hi = 1e9;
    double n_c_lo = 1e-3, n_c_hi = 1e6;
    // Optional anomaly mask: drop grid points with T_b < mask_t_below_K AND
    // n_p < mask_np_below. Zero disables.
    double mask_t_below_K = 0.0;
    double mask_np_below = 0.0;
    std::uint64_t multi_start_seed = 20240801;
    int multi_starts = 5;
    // The fit is rejected (advice: raise i_ext) above this relative rms.
    double residual_ceiling = 0.05;
};

struct PerPowerParams {
    double n_photon = 0.0;
    double s_rate = 0.0;  // s^-1
    double kappa = 0.0;
    double s_sigma = 0.0;
    double kappa_sigma = 0.0;
    // kappa pinned at a bound: the quasiparticle channel is unidentifiable
    // at this power.
    bool qp_degenerate = false;
};

struct GridPoint {
    double t_bath = 0.0;
    double n_photon = 0.0;
    double q_i = 0.0; // interpolated measurement the joint fit targeted
    bool masked = false;
};

struct ModelFit {
    TlsParams tls;
    double q_tls0_sigma = 0.0, n_c_sigma = 0.0, alpha_sigma = 0.0;
    double q_a = 0.0;   // fixed input echoed back
    double i_ext = 0.0; // fixed input echoed back
    double omega_r = 0.0;
    double ls_over_lm = 0.0;
    std::vector<PerPowerParams> per_power;            // one entry per grid photon number
    std::vector<std::pair<std::pair<double, double>, double>> tqp_surface; // ((T_b, n_p), T_qp)
    std::vector<GridPoint> grid;                      // fit targets incl. masked rows
    double goodness = 0.0;     // R^2 on 1/Q_I over unmasked points
    double residual_rms = 0.0; // relative rms over unmasked points
};

/// The joint temperature-power fit: per-temperature TLS-only fits feed the
/// photon-number grid, then global (Q_TLS0, n_c, alpha) and per-power
/// (s_j, kappa_j) are fit jointly against the combined loss model with Q_A
/// and I_ext held constant.
ModelFit fit_full_model(const std::map<double, PowerSeries>& dataset, const MaterialEntry& mat,
                        double omega_r, const FullFitConfig& cfg);

struct LossRow {
    double t_bath = 0.0;
    double n_photon = 0.0;
    double t_qp = 0.0;
    double inv_q_a = 0.0;
    double inv_q_tls = 0.0;
    double inv_q_qp = 0.0;
    double inv_q_total = 0.0;
};

/// Channel decomposition of the fitted model over a (T_b, n_p) grid.
/// Photon numbers off the fitted grid take log-interpolated (s, kappa).
std::vector<LossRow> decompose_losses(const ModelFit& fit, const MaterialEntry& mat,
                                      const std::vector<double>& t_grid,
                                      const std::vector<double>& np_grid);

} // namespace qloss
