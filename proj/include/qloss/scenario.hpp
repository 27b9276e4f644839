#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qloss/loss.hpp"
#include "qloss/manifest.hpp"
#include "qloss/materials.hpp"
#include "qloss/pipeline.hpp"

namespace qloss {

/// Forward-model scenario for synthetic datasets: the combined loss model
/// with smooth per-power relaxation and excess-loss curves
///   s(n) = s0 n^s_exp,   kappa(n) = kappa0 + kappa_slope log10(max(n, 1)).
struct LossScenario {
    std::string id;
    std::string material;          // key into the registry
    std::string material_config;   // JSON registry text
    double f_r = 0.0;              // Hz
    double q_c = 0.0;
    double q_a = 2e7;
    TlsParams tls;
    double i_ext = 0.0;            // um^-3 s^-1
    double s0 = 0.0, s_exp = 0.0;
    double kappa0 = 1.0, kappa_slope = 0.0;
    std::vector<double> temps_K;
    std::vector<double> powers_dbm;
    // Spectrum synthesis.
    double amp = 1.0;
    double global_phase = 0.0;     // rad
    double path_phase_rate = 0.0;  // rad/Hz
    double phi = 0.0;              // rad
    int n_points = 401;
    double span_linewidths = 16.0;
    double noise_sigma = 1e-3;

    double s_of(double n_photon) const;
    double kappa_of(double n_photon) const;
};

LossScenario tin_like_scenario();
LossScenario al_like_scenario();
LossScenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const LossScenario& sc);

/// Combined-model internal loss at one (T_b, n_p) point.
LossBudget scenario_loss(const LossScenario& sc, const MaterialEntry& mat, double t_bath,
                         double n_photon);

/// Self-consistent photon number at a given applied power: the photon number
/// both sets and is set by Q_I.
double scenario_photon_number(const LossScenario& sc, const MaterialEntry& mat, double t_bath,
                              double p_in_watts);

/// Writes manifest + spectra (+ the generating truth and a matching fit
/// config) under out_dir. Deterministic in (scenario, seed).
DatasetManifest simulate_dataset(const LossScenario& sc, const std::filesystem::path& out_dir,
                                 std::uint64_t seed, std::optional<double> noise_override);

/// Power series sampled straight from the loss model (no spectrum layer),
/// with multiplicative Gaussian noise of the given relative size on Q_I.
std::map<double, PowerSeries> scenario_power_series(const LossScenario& sc,
                                                    const MaterialEntry& mat,
                                                    const std::vector<double>& np_points,
                                                    double rel_noise, std::uint64_t seed);

} // namespace qloss
