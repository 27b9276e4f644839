// qloss: simulate, extract, fit, and export resonator loss analyses.
//
// Exit codes: 0 success, 1 usage, 2 data/config error, 3 fit non-convergence.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "qloss/errors.hpp"
#include "qloss/manifest.hpp"
#include "qloss/pipeline.hpp"
#include "qloss/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qloss;

namespace {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const int count = std::min<int>(jobs, static_cast<int>(n));
    workers.reserve(static_cast<std::size_t>(count));
    for (int w = 0; w < count; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& t : workers) t.join();
}

std::string config_or_env(const std::string& config_path) {
    if (!config_path.empty()) return config_path;
    if (const char* env = std::getenv("QLOSS_CONFIG")) return env;
    return {};
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const std::string& scenario_name, const std::string& config_path,
                 const std::string& out, std::uint64_t seed, std::optional<double> noise) {
    LossScenario sc;
    const std::string cfg = config_or_env(config_path);
    if (!cfg.empty()) {
        sc = scenario_from_json(read_text_file(cfg));
    } else if (scenario_name == "tin-like") {
        sc = tin_like_scenario();
    } else if (scenario_name == "al-like") {
        sc = al_like_scenario();
    } else {
        throw ConfigError("unknown scenario '" + scenario_name +
                          "' (use tin-like, al-like, or --config)");
    }
    const DatasetManifest m = simulate_dataset(sc, out, seed, noise);
    std::cout << "wrote " << m.entries.size() << " spectra under " << out << "\n";
    return 0;
}

// ----------------------------------------------------------------- extract

int cmd_extract(const std::string& in, const std::string& out, int jobs) {
    const fs::path in_path(in);
    const fs::path manifest_path =
        fs::is_directory(in_path) ? in_path / "manifest.json" : in_path;
    const fs::path base = manifest_path.parent_path();
    const DatasetManifest manifest = read_manifest(manifest_path);
    const MaterialRegistry reg = load_materials(manifest.material_config);
    for (const auto& d : reg.diagnostics) std::cerr << "note: " << d << "\n";
    const MaterialEntry& mat = reg.at(manifest.material);

    const std::size_t n = manifest.entries.size();
    std::vector<std::optional<ExtractionRecord>> initial(n);
    std::vector<std::string> failures(n);

    parallel_for(n, jobs, [&](std::size_t i) {
        const auto& entry = manifest.entries[i];
        try {
            Spectrum sp = read_spectrum_csv(base / entry.file);
            sp.t_bath = entry.temperature_K;
            sp.p_in_dbm = entry.power_dbm;
            ExtractionRecord rec;
            rec.result = extract_resonator_params(sp);
            rec.t_bath = entry.temperature_K;
            rec.p_in_dbm = entry.power_dbm;
            rec.source = entry.file;
            initial[i] = std::move(rec);
        } catch (const std::exception& err) {
            failures[i] = err.what();
        }
    });

    std::vector<ExtractionRecord> good;
    json failed = json::array();
    for (std::size_t i = 0; i < n; ++i) {
        if (initial[i]) {
            good.push_back(*initial[i]);
        } else {
            failed.push_back({{"file", manifest.entries[i].file}, {"error", failures[i]}});
            std::cerr << "extraction failed for " << manifest.entries[i].file << ": "
                      << failures[i] << "\n";
        }
    }
    if (good.size() * 2 < n) {
        throw DataError("extract: more than half of the spectra failed (" +
                        std::to_string(n - good.size()) + " of " + std::to_string(n) + ")");
    }

    const QcPooling pooling = pool_qc(good, mat.material.tc);

    // Refit pass with the pooled coupling Q frozen.
    std::vector<ExtractionRecord> refit(good.size());
    parallel_for(good.size(), jobs, [&](std::size_t i) {
        const auto& rec = good[i];
        Spectrum sp = read_spectrum_csv(base / rec.source);
        sp.t_bath = rec.t_bath;
        sp.p_in_dbm = rec.p_in_dbm;
        ExtractionRecord out_rec = rec;
        out_rec.result = extract_resonator_params_fixed_qc(sp, pooling.qc0);
        refit[i] = std::move(out_rec);
    });

    json j;
    j["schema_version"] = 1;
    j["resonator_id"] = manifest.resonator_id;
    j["material"] = manifest.material;
    j["material_config"] = json::parse(manifest.material_config);
    j["f_r_hint_hz"] = manifest.f_r_hint;
    j["initial"] = good;
    j["failures"] = failed;
    j["pooled_qc0"] = pooling.qc0;
    j["pooled_window_size"] = pooling.window.size();
    j["refit"] = refit;
    j["provenance"] = {{"tool_version", kToolVersion},
                       {"manifest_hash", content_hash(read_text_file(manifest_path))}};

    const fs::path out_path = fs::path(out) / "extraction.json";
    write_text_file(out_path, j.dump(2) + "\n");
    std::cout << "extracted " << good.size() << "/" << n << " spectra, pooled Q_C = "
              << pooling.qc0 << ", wrote " << out_path.string() << "\n";
    return 0;
}

// --------------------------------------------------------------------- fit

FullFitConfig parse_fit_config(const json& j) {
    FullFitConfig cfg;
    cfg.q_a = j.value("q_a", 2e7);
    if (!j.contains("i_ext_per_um3_s")) {
        throw ConfigError("fit config: i_ext_per_um3_s is required");
    }
    cfg.i_ext = j.at("i_ext_per_um3_s").get<double>();
    if (j.contains("np_grid")) cfg.np_grid = j.at("np_grid").get<std::vector<double>>();
    cfg.mask_t_below_K = j.value("mask_t_below_K", 0.0);
    cfg.mask_np_below = j.value("mask_np_below", 0.0);
    cfg.multi_start_seed = j.value("multi_start_seed", std::uint64_t{20240801});
    cfg.multi_starts = j.value("multi_starts", 5);
    cfg.residual_ceiling = j.value("residual_ceiling", 0.05);
    if (j.contains("bounds")) {
        const auto& b = j.at("bounds");
        cfg.s_lo = b.value("s_lo", cfg.s_lo);
        cfg.s_hi = b.value("s_hi", cfg.s_hi);
        cfg.kappa_lo = b.value("kappa_lo", cfg.kappa_lo);
        cfg.kappa_hi = b.value("kappa_hi", cfg.kappa_hi);
        cfg.q_tls_lo = b.value("q_tls_lo", cfg.q_tls_lo);
        cfg.q_tls_hi = b.value("q_tls_hi", cfg.q_tls_hi);
        cfg.n_c_lo = b.value("n_c_lo", cfg.n_c_lo);
        cfg.n_c_hi = b.value("n_c_hi", cfg.n_c_hi);
    }
    return cfg;
}

int cmd_fit(const std::string& in, const std::string& config_path, bool tls_only,
            const std::string& out) {
    const fs::path in_path(in);
    const fs::path extraction_path =
        fs::is_directory(in_path) ? in_path / "extraction.json" : in_path;
    const json ex = json::parse(read_text_file(extraction_path));

    std::string fit_cfg_text = "{}";
    const std::string cfg_path = config_or_env(config_path);
    if (!cfg_path.empty()) {
        fit_cfg_text = read_text_file(cfg_path);
    } else if (fs::exists(extraction_path.parent_path() / "fit_config.json")) {
        fit_cfg_text = read_text_file(extraction_path.parent_path() / "fit_config.json");
    }
    const json fit_cfg_json = json::parse(fit_cfg_text);

    const std::string material_config = ex.at("material_config").dump();
    const MaterialRegistry reg = load_materials(material_config);
    const MaterialEntry& mat = reg.at(ex.at("material").get<std::string>());

    const auto records = ex.at(ex.contains("refit") ? "refit" : "initial")
                             .get<std::vector<ExtractionRecord>>();
    if (records.empty()) throw DataError("fit: extraction results are empty");

    // Group into per-temperature power series.
    std::map<double, PowerSeries> dataset;
    double f_r_sum = 0.0;
    for (const auto& rec : records) {
        auto& series = dataset[rec.t_bath];
        series.t_bath = rec.t_bath;
        series.points.push_back(
            {rec.result.n_photon, rec.result.params.q_i, rec.result.uncertainties.q_i});
        f_r_sum += rec.result.params.f0;
    }
    const double f_r = f_r_sum / static_cast<double>(records.size());

    json bundle;
    bundle["schema_version"] = 1;
    bundle["resonator_id"] = ex.at("resonator_id");
    bundle["material"] = ex.at("material");
    bundle["material_config"] = json::parse(material_config);
    bundle["f_r_hz"] = f_r;
    bundle["pooled_qc0"] = ex.value("pooled_qc0", 0.0);
    bundle["kappa_reference"] = mat.kappa_reference;

    json tls_fits = json::array();
    for (auto& [t_bath, series] : dataset) {
        std::sort(series.points.begin(), series.points.end(),
                  [](const auto& a, const auto& b) { return a.n_photon < b.n_photon; });
        const TlsOnlyFit f = fit_power_series(series);
        tls_fits.push_back({{"t_bath_K", t_bath}, {"fit", f}});
    }
    bundle["tls_only_fits"] = tls_fits;

    if (!tls_only) {
        const FullFitConfig cfg = parse_fit_config(fit_cfg_json);
        const ModelFit fit = fit_full_model(dataset, mat, 2.0 * M_PI * f_r, cfg);
        bundle["model_fit"] = fit;
    }

    bundle["provenance"] = {
        {"tool_version", kToolVersion},
        {"config_hash", content_hash(fit_cfg_json.dump())},
        {"extraction_hash", content_hash(read_text_file(extraction_path))},
        {"multi_start_seed", fit_cfg_json.value("multi_start_seed", std::uint64_t{20240801})},
        {"tls_only", tls_only}};

    const fs::path out_path = fs::path(out) / "bundle.json";
    write_text_file(out_path, bundle.dump(2) + "\n");
    std::cout << "wrote " << out_path.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- plotdata

int cmd_plotdata(const std::string& in, const std::string& out) {
    const fs::path in_path(in);
    const fs::path bundle_path = fs::is_directory(in_path) ? in_path / "bundle.json" : in_path;
    const json bundle = json::parse(read_text_file(bundle_path));
    if (!bundle.contains("model_fit")) {
        throw DataError("plotdata: bundle has no model fit (was it produced with --tls-only?)");
    }
    const ModelFit fit = bundle.at("model_fit").get<ModelFit>();
    const MaterialRegistry reg = load_materials(bundle.at("material_config").dump());
    const MaterialEntry& mat = reg.at(bundle.at("material").get<std::string>());

    std::vector<double> temps, powers;
    for (const auto& g : fit.grid) {
        if (temps.empty() || temps.back() != g.t_bath) temps.push_back(g.t_bath);
    }
    std::sort(temps.begin(), temps.end());
    temps.erase(std::unique(temps.begin(), temps.end()), temps.end());
    for (const auto& p : fit.per_power) powers.push_back(p.n_photon);

    const auto rows = decompose_losses(fit, mat, temps, powers);
    const auto grid_qi = [&](double t, double np) {
        for (const auto& g : fit.grid) {
            if (g.t_bath == t && g.n_photon == np) return g.q_i;
        }
        return 0.0;
    };

    const fs::path out_dir(out);
    fs::create_directories(out_dir);
    std::ostringstream dec;
    dec.precision(17);
    dec << "t_bath_K,n_photon,q_i_data,q_i_model,inv_q_total,inv_q_a,inv_q_tls,inv_q_qp,t_qp_K\n";
    for (const auto& r : rows) {
        dec << r.t_bath << ',' << r.n_photon << ',' << grid_qi(r.t_bath, r.n_photon) << ','
            << 1.0 / r.inv_q_total << ',' << r.inv_q_total << ',' << r.inv_q_a << ','
            << r.inv_q_tls << ',' << r.inv_q_qp << ',' << r.t_qp << '\n';
    }
    write_text_file(out_dir / "decomposition.csv", dec.str());

    std::ostringstream sk;
    sk.precision(17);
    sk << "n_photon,s_rate_per_s,s_sigma,kappa,kappa_sigma,qp_degenerate\n";
    for (const auto& p : fit.per_power) {
        sk << p.n_photon << ',' << p.s_rate << ',' << p.s_sigma << ',' << p.kappa << ','
           << p.kappa_sigma << ',' << (p.qp_degenerate ? 1 : 0) << '\n';
    }
    write_text_file(out_dir / "s_kappa_vs_power.csv", sk.str());

    std::ostringstream tq;
    tq.precision(17);
    tq << "t_bath_K,n_photon,t_qp_K\n";
    for (const auto& [key, tqp] : fit.tqp_surface) {
        tq << key.first << ',' << key.second << ',' << tqp << '\n';
    }
    write_text_file(out_dir / "tqp_surface.csv", tq.str());

    std::cout << "wrote plot tables under " << out_dir.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Combined TLS + non-equilibrium quasiparticle loss analysis for "
                 "superconducting resonators"};
    app.require_subcommand(1);

    std::string config, out = ".", in = ".", scenario = "tin-like";
    std::uint64_t seed = 1;
    int jobs = 1;
    bool tls_only = false;
    double noise = -1.0;

    auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
    sim->add_option("--scenario", scenario, "tin-like or al-like");
    sim->add_option("--config", config, "Explicit scenario JSON");
    sim->add_option("--out", out, "Output directory")->required();
    sim->add_option("--seed", seed, "Noise seed");
    sim->add_option("--noise", noise, "Override spectrum noise sigma");

    auto* ext = app.add_subcommand("extract", "Fit S21 spectra and pool Q_C");
    ext->add_option("--in", in, "Dataset directory or manifest path")->required();
    ext->add_option("--out", out, "Output directory")->required();
    ext->add_option("--jobs", jobs, "Worker threads");

    auto* fit = app.add_subcommand("fit", "TLS-only and joint model fits");
    fit->add_option("--in", in, "Directory with extraction.json")->required();
    fit->add_option("--config", config, "Fit config JSON (q_a, i_ext, grid, mask)");
    fit->add_option("--out", out, "Output directory")->required();
    fit->add_flag("--tls-only", tls_only, "Stop after the per-temperature power fits");

    auto* plot = app.add_subcommand("plotdata", "Emit tidy CSV tables from a bundle");
    plot->add_option("--in", in, "Bundle path or directory")->required();
    plot->add_option("--out", out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) {
            return cmd_simulate(scenario, config, out, seed,
                                noise >= 0.0 ? std::optional<double>(noise) : std::nullopt);
        }
        if (ext->parsed()) return cmd_extract(in, out, jobs);
        if (fit->parsed()) return cmd_fit(in, config, tls_only, out);
        if (plot->parsed()) return cmd_plotdata(in, out);
    } catch (const FitError& err) {
        std::cerr << "fit error: " << err.what() << "\n";
        return 3;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
    return 0;
}
