#include "qloss/scenario.hpp"

#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include <json.hpp>

#include "qloss/constants.hpp"
#include "qloss/errors.hpp"
#include "qloss/qpdyn.hpp"

namespace qloss {

using nlohmann::json;

double LossScenario::s_of(double n_photon) const {
    return s0 * std::pow(std::max(n_photon, 1e-12), s_exp);
}

double LossScenario::kappa_of(double n_photon) const {
    return kappa0 + kappa_slope * std::log10(std::max(n_photon, 1.0));
}

namespace {

std::string default_registry_json() {
    // Serialize the built-in registry config once.
    static const std::string text = [] {
        json j;
        j["materials"]["TiN"] = {{"tc_K", 5.3},
                                 {"n0_per_eV_um3", 2.96e10},
                                 {"tau0_s", 5.5e-9},
                                 {"vs_m_per_s", 3310.0},
                                 {"thickness_m", 100e-9},
                                 {"eta", 0.301},
                                 {"ls_over_lm", 0.4},
                                 {"beta_per_s", 2.47e9},
                                 {"gamma_per_s", 2.49e9},
                                 {"R_um3_per_s", 83.3},
                                 {"kappa_reference", 1.0}};
        j["materials"]["Al"] = {{"tc_K", 1.2},
                                {"n0_per_eV_um3", 1.72e10},
                                {"tau0_s", 4.38e-7},
                                {"vs_m_per_s", 4430.0},
                                {"thickness_m", 100e-9},
                                {"eta", 0.497},
                                {"ls_over_lm", 0.015},
                                {"beta_per_s", 4.34e9},
                                {"gamma_per_s", 5.50e9},
                                {"R_um3_per_s", 31.6},
                                {"kappa_reference", 1.0 / 3.0}};
        return j.dump(2);
    }();
    return text;
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
    return v;
}

} // namespace

LossScenario tin_like_scenario() {
    LossScenario sc;
    sc.id = "tin-like";
    sc.material = "TiN";
    sc.material_config = default_registry_json();
    sc.f_r = 4.74e9;
    sc.q_c = 1.49e5;
    sc.q_a = 2e7;
    sc.tls = {1.7e5, 1.46, 0.57};
    sc.i_ext = 2.4e6;
    sc.s0 = 200.0;
    sc.s_exp = 0.20;
    sc.kappa0 = 1.0;
    sc.kappa_slope = -0.1 / 6.0;
    sc.temps_K = linspace(0.04, 1.18, 24);
    sc.powers_dbm = linspace(-145.0, -85.0, 21);
    sc.phi = 0.12;
    sc.amp = 0.82;
    sc.global_phase = 0.6;
    sc.path_phase_rate = 1.1e-7; // ~17 ns electrical delay
    return sc;
}

LossScenario al_like_scenario() {
    LossScenario sc;
    sc.id = "al-like";
    sc.material = "Al";
    sc.material_config = default_registry_json();
    sc.f_r = 5.25e9;
    sc.q_c = 1.51e5;
    sc.q_a = 2e7;
    sc.tls = {2.0e6, 1.0, 0.7}; // weak TLS channel
    sc.i_ext = 1.24e7;
    sc.s0 = 2.6e4;
    sc.s_exp = 0.15;
    sc.kappa0 = 2.0;
    sc.kappa_slope = -0.5 / 6.0;
    sc.temps_K = linspace(0.04, 0.32, 12);
    sc.powers_dbm = linspace(-145.0, -85.0, 21);
    sc.phi = -0.08;
    sc.amp = 1.15;
    sc.global_phase = -1.1;
    sc.path_phase_rate = 9.0e-8;
    return sc;
}

std::string scenario_to_json(const LossScenario& sc) {
    json j;
    j["id"] = sc.id;
    j["material"] = sc.material;
    j["material_config"] = json::parse(sc.material_config);
    j["f_r_hz"] = sc.f_r;
    j["q_c"] = sc.q_c;
    j["q_a"] = sc.q_a;
    j["tls"] = {{"q_tls0", sc.tls.q_tls0}, {"n_c", sc.tls.n_c}, {"alpha", sc.tls.alpha}};
    j["i_ext_per_um3_s"] = sc.i_ext;
    j["s_curve"] = {{"s0_per_s", sc.s0}, {"exponent", sc.s_exp}};
    j["kappa_curve"] = {{"kappa0", sc.kappa0}, {"slope_per_decade", sc.kappa_slope}};
    j["temps_K"] = sc.temps_K;
    j["powers_dbm"] = sc.powers_dbm;
    j["s21"] = {{"amp", sc.amp},
                {"global_phase_rad", sc.global_phase},
                {"path_phase_rate_rad_per_hz", sc.path_phase_rate},
                {"phi_rad", sc.phi},
                {"n_points", sc.n_points},
                {"span_linewidths", sc.span_linewidths},
                {"noise_sigma", sc.noise_sigma}};
    return j.dump(2);
}

LossScenario scenario_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& err) {
        throw ConfigError(std::string("scenario config does not parse: ") + err.what());
    }
    try {
        LossScenario sc;
        sc.id = j.at("id").get<std::string>();
        sc.material = j.at("material").get<std::string>();
        sc.material_config =
            j.contains("material_config") ? j.at("material_config").dump() : default_registry_json();
        sc.f_r = j.at("f_r_hz").get<double>();
        sc.q_c = j.at("q_c").get<double>();
        sc.q_a = j.value("q_a", 2e7);
        sc.tls.q_tls0 = j.at("tls").at("q_tls0").get<double>();
        sc.tls.n_c = j.at("tls").at("n_c").get<double>();
        sc.tls.alpha = j.at("tls").at("alpha").get<double>();
        sc.i_ext = j.at("i_ext_per_um3_s").get<double>();
        sc.s0 = j.at("s_curve").at("s0_per_s").get<double>();
        sc.s_exp = j.at("s_curve").at("exponent").get<double>();
        sc.kappa0 = j.at("kappa_curve").at("kappa0").get<double>();
        sc.kappa_slope = j.at("kappa_curve").at("slope_per_decade").get<double>();
        sc.temps_K = j.at("temps_K").get<std::vector<double>>();
        sc.powers_dbm = j.at("powers_dbm").get<std::vector<double>>();
        if (j.contains("s21")) {
            const auto& s = j.at("s21");
            sc.amp = s.value("amp", 1.0);
            sc.global_phase = s.value("global_phase_rad", 0.0);
            sc.path_phase_rate = s.value("path_phase_rate_rad_per_hz", 0.0);
            sc.phi = s.value("phi_rad", 0.0);
            sc.n_points = s.value("n_points", 401);
            sc.span_linewidths = s.value("span_linewidths", 16.0);
            sc.noise_sigma = s.value("noise_sigma", 1e-3);
        }
        sc.tls.validate();
        return sc;
    } catch (const json::exception& err) {
        throw ConfigError(std::string("scenario config: ") + err.what());
    }
}

LossBudget scenario_loss(const LossScenario& sc, const MaterialEntry& mat, double t_bath,
                         double n_photon) {
    const GapModel gm(mat.material);
    const DriveParams drive{sc.i_ext, sc.s_of(n_photon), t_bath};
    const double nqp = steady_state_nqp(drive, mat.rates, gm);
    const double tqp = effective_temperature(nqp, gm);
    const QpLossParams qp{sc.kappa_of(n_photon), mat.film.ls_over_lm, 2.0 * M_PI * sc.f_r};
    return total_inverse_qi(n_photon, t_bath, tqp, sc.tls, qp, 1.0 / sc.q_a, gm);
}

double scenario_photon_number(const LossScenario& sc, const MaterialEntry& mat, double t_bath,
                              double p_in_watts) {
    if (p_in_watts <= 0.0) return 0.0;
    // n and Q_I set each other; bisect n - n_model(Q_I(n)) in log space.
    const auto mismatch = [&](double log_n) {
        const double n = std::exp(log_n);
        const double qi = 1.0 / scenario_loss(sc, mat, t_bath, n).inv_q_total;
        return log_n - std::log(photon_number(p_in_watts, sc.f_r, qi, sc.q_c));
    };
    double lo = std::log(1e-9), hi = std::log(1e15);
    if (mismatch(lo) > 0.0 || mismatch(hi) < 0.0) {
        throw NumericalError("scenario_photon_number: no self-consistent photon number");
    }
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mismatch(mid) < 0.0 ? lo : hi) = mid;
    }
    return std::exp(0.5 * (lo + hi));
}

DatasetManifest simulate_dataset(const LossScenario& sc, const std::filesystem::path& out_dir,
                                 std::uint64_t seed, std::optional<double> noise_override) {
    const MaterialRegistry reg = load_materials(sc.material_config);
    const MaterialEntry& mat = reg.at(sc.material);
    const double noise = noise_override.value_or(sc.noise_sigma);

    DatasetManifest manifest;
    manifest.resonator_id = sc.id;
    manifest.material = sc.material;
    manifest.material_config = sc.material_config;
    manifest.f_r_hint = sc.f_r;

    json truth;
    truth["scenario"] = json::parse(scenario_to_json(sc));
    truth["seed"] = seed;
    truth["noise_sigma"] = noise;
    json points = json::array();

    std::filesystem::create_directories(out_dir / "spectra");
    std::size_t index = 0;
    for (const double t_bath : sc.temps_K) {
        for (const double p_dbm : sc.powers_dbm) {
            const double p_w = dbm_to_watts(p_dbm);
            const double n_photon = scenario_photon_number(sc, mat, t_bath, p_w);
            const double inv_qi = scenario_loss(sc, mat, t_bath, n_photon).inv_q_total;

            S21Params p;
            p.f0 = sc.f_r;
            p.q_i = 1.0 / inv_qi;
            p.q_c = sc.q_c;
            p.phi = sc.phi;
            p.amp = sc.amp;
            p.global_phase = sc.global_phase;
            p.path_phase_rate = sc.path_phase_rate;

            const double q_total = 1.0 / (inv_qi + 1.0 / sc.q_c);
            const double span = sc.span_linewidths * sc.f_r / q_total;
            Spectrum sp = synth_spectrum(p, linspace(sc.f_r - span / 2, sc.f_r + span / 2,
                                                     sc.n_points),
                                         noise, seed + index);
            sp.t_bath = t_bath;
            sp.p_in_dbm = p_dbm;

            std::ostringstream name;
            name << "spectra/sweep_" << std::setw(4) << std::setfill('0') << index << ".csv";
            write_spectrum_csv(out_dir / name.str(), sp);
            manifest.entries.push_back({name.str(), t_bath, p_dbm});

            points.push_back({{"t_bath_K", t_bath},
                              {"p_in_dbm", p_dbm},
                              {"n_photon", n_photon},
                              {"q_i", 1.0 / inv_qi}});
            ++index;
        }
    }
    truth["points"] = points;

    write_manifest(out_dir / "manifest.json", manifest);
    write_text_file(out_dir / "truth.json", truth.dump(2) + "\n");

    // Ready-made fit config matching the scenario.
    json fit_cfg;
    fit_cfg["q_a"] = sc.q_a;
    fit_cfg["i_ext_per_um3_s"] = sc.i_ext;
    fit_cfg["np_grid"] = {1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6};
    fit_cfg["multi_start_seed"] = 20240801;
    write_text_file(out_dir / "fit_config.json", fit_cfg.dump(2) + "\n");
    return manifest;
}

std::map<double, PowerSeries> scenario_power_series(const LossScenario& sc,
                                                    const MaterialEntry& mat,
                                                    const std::vector<double>& np_points,
                                                    double rel_noise, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto uniform01 = [&rng]() {
        return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    };
    const auto normal = [&]() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    };

    std::map<double, PowerSeries> dataset;
    for (const double t_bath : sc.temps_K) {
        PowerSeries series;
        series.t_bath = t_bath;
        for (const double np : np_points) {
            const double qi = 1.0 / scenario_loss(sc, mat, t_bath, np).inv_q_total;
            const double noisy = qi * (1.0 + rel_noise * normal());
            series.points.push_back({np, noisy, rel_noise * qi});
        }
        dataset.emplace(t_bath, std::move(series));
    }
    return dataset;
}

} // namespace qloss
