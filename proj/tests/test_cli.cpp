#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qloss/errors.hpp"
#include "qloss/manifest.hpp"
#include "qloss/s21.hpp"
#include "qloss/scenario.hpp"

using namespace qloss;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kCli = QLOSS_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = std::string(kCli) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("qloss_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Small but complete scenario so the full CLI chain stays fast.
void write_small_scenario(const fs::path& path, double noise) {
    LossScenario sc = tin_like_scenario();
    sc.id = "tin-small";
    sc.temps_K = {0.05, 0.25, 0.5, 0.75, 1.0, 1.15};
    sc.powers_dbm.clear();
    for (int i = 0; i < 13; ++i) sc.powers_dbm.push_back(-165.0 + 80.0 * i / 12.0);
    sc.n_points = 201;
    sc.noise_sigma = noise;
    write_text_file(path, scenario_to_json(sc));
}

} // namespace

TEST_CASE("usage errors exit with code 1") {
    CHECK(run("frobnicate") == 1);
    CHECK(run("simulate") == 1); // --out is required
}

TEST_CASE("missing inputs exit with code 2") {
    const fs::path dir = fresh_dir("missing");
    CHECK(run("extract --in " + (dir / "nope.json").string() + " --out " + dir.string()) == 2);
}

TEST_CASE("simulate is deterministic and honors --noise 0") {
    const fs::path dir1 = fresh_dir("sim1");
    const fs::path dir2 = fresh_dir("sim2");
    const fs::path cfg = dir1 / "scenario.json";
    write_small_scenario(cfg, 1e-3);

    REQUIRE(run("simulate --config " + cfg.string() + " --seed 7 --out " + dir1.string()) == 0);
    REQUIRE(run("simulate --config " + cfg.string() + " --seed 7 --out " + dir2.string()) == 0);

    const DatasetManifest m1 = read_manifest(dir1 / "manifest.json");
    CHECK(m1.entries.size() == 6 * 13);
    CHECK(read_text_file(dir1 / m1.entries[5].file) == read_text_file(dir2 / m1.entries[5].file));

    // noise 0: spectra agree with the forward model rebuilt from the truth file
    const fs::path dir3 = fresh_dir("sim3");
    REQUIRE(run("simulate --config " + cfg.string() + " --noise 0 --out " + dir3.string()) == 0);
    const json truth = json::parse(read_text_file(dir3 / "truth.json"));
    const DatasetManifest m3 = read_manifest(dir3 / "manifest.json");
    const Spectrum sp = read_spectrum_csv(dir3 / m3.entries[0].file);
    S21Params p;
    p.f0 = truth.at("scenario").at("f_r_hz").get<double>();
    p.q_i = truth.at("points")[0].at("q_i").get<double>();
    p.q_c = truth.at("scenario").at("q_c").get<double>();
    p.phi = truth.at("scenario").at("s21").at("phi_rad").get<double>();
    p.amp = truth.at("scenario").at("s21").at("amp").get<double>();
    p.global_phase = truth.at("scenario").at("s21").at("global_phase_rad").get<double>();
    p.path_phase_rate =
        truth.at("scenario").at("s21").at("path_phase_rate_rad_per_hz").get<double>();
    for (std::size_t i = 0; i < sp.freqs.size(); i += 40) {
        const std::complex<double> model = 1.0 / model_s21_inv(sp.freqs[i], p);
        CHECK(std::abs(sp.s21[i] - model) < 1e-9 * std::abs(model));
    }
}

TEST_CASE("the full chain runs: extract, fit, plotdata") {
    const fs::path dir = fresh_dir("chain");
    const fs::path cfg = dir / "scenario.json";
    write_small_scenario(cfg, 5e-4);
    REQUIRE(run("simulate --config " + cfg.string() + " --seed 3 --out " + dir.string()) == 0);

    REQUIRE(run("extract --in " + dir.string() + " --out " + dir.string() + " --jobs 4") == 0);
    const json ex = json::parse(read_text_file(dir / "extraction.json"));
    CHECK(ex.at("failures").empty());
    CHECK(ex.at("pooled_qc0").get<double>() == doctest::Approx(1.49e5).epsilon(0.01));
    // pooled refit pins q_c exactly
    for (const auto& r : ex.at("refit")) {
        CHECK(r.at("params").at("q_c").get<double>() == ex.at("pooled_qc0").get<double>());
    }

    // tls-only bundle first
    const fs::path tls_dir = dir / "tls_only";
    fs::create_directories(tls_dir);
    REQUIRE(run("fit --in " + dir.string() + " --tls-only --out " + tls_dir.string()) == 0);
    const json tls_bundle = json::parse(read_text_file(tls_dir / "bundle.json"));
    CHECK_FALSE(tls_bundle.contains("model_fit"));
    CHECK(tls_bundle.at("tls_only_fits").size() == 6);

    // full fit (uses the fit_config.json simulate wrote next to the data)
    REQUIRE(run("fit --in " + dir.string() + " --out " + dir.string()) == 0);
    const json bundle = json::parse(read_text_file(dir / "bundle.json"));
    REQUIRE(bundle.contains("model_fit"));
    CHECK(bundle.at("model_fit").at("goodness_r2").get<double>() > 0.95);

    // determinism: a second fit run produces byte-identical output
    const fs::path rerun = dir / "rerun";
    fs::create_directories(rerun);
    REQUIRE(run("fit --in " + dir.string() + " --out " + rerun.string()) == 0);
    CHECK(read_text_file(dir / "bundle.json") == read_text_file(rerun / "bundle.json"));

    REQUIRE(run("plotdata --in " + dir.string() + " --out " + (dir / "plots").string()) == 0);
    CHECK(fs::exists(dir / "plots" / "decomposition.csv"));
    CHECK(fs::exists(dir / "plots" / "s_kappa_vs_power.csv"));
    const std::string tqp = read_text_file(dir / "plots" / "tqp_surface.csv");
    CHECK(tqp.rfind("t_bath_K,n_photon,t_qp_K\n", 0) == 0);

    // decomposition rows are additive at machine precision
    std::istringstream dec(read_text_file(dir / "plots" / "decomposition.csv"));
    std::string line;
    std::getline(dec, line); // header
    int rows = 0;
    while (std::getline(dec, line)) {
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        double tb, np, qd, qm, total, qa, qtls, qqp, tqp_k;
        row >> tb >> np >> qd >> qm >> total >> qa >> qtls >> qqp >> tqp_k;
        CHECK(total == doctest::Approx(qa + qtls + qqp).epsilon(1e-14));
        ++rows;
    }
    CHECK(rows == 6 * 7);
}

TEST_CASE("a corrupt spectrum is flagged while the rest proceed") {
    const fs::path dir = fresh_dir("corrupt");
    const fs::path cfg = dir / "scenario.json";
    write_small_scenario(cfg, 5e-4);
    REQUIRE(run("simulate --config " + cfg.string() + " --seed 5 --out " + dir.string()) == 0);

    const DatasetManifest m = read_manifest(dir / "manifest.json");
    write_text_file(dir / m.entries[3].file, "frequency_hz,s21_real,s21_imag\ngarbage\n");

    REQUIRE(run("extract --in " + dir.string() + " --out " + dir.string()) == 0);
    const json ex = json::parse(read_text_file(dir / "extraction.json"));
    CHECK(ex.at("failures").size() == 1);
    CHECK(ex.at("initial").size() == m.entries.size() - 1);
}

TEST_CASE("manifest round trip preserves the dataset description") {
    const fs::path dir = fresh_dir("manifest");
    DatasetManifest m;
    m.resonator_id = "unit";
    m.material = "TiN";
    m.material_config = tin_like_scenario().material_config;
    m.entries = {{"a.csv", 0.04, -120.0}, {"b.csv", 0.05, -120.0}};
    write_manifest(dir / "m.json", m);
    const DatasetManifest back = read_manifest(dir / "m.json");
    CHECK(back.resonator_id == m.resonator_id);
    CHECK(back.material == m.material);
    REQUIRE(back.entries.size() == 2);
    CHECK(back.entries[1].file == "b.csv");
    CHECK(back.entries[1].temperature_K == 0.05);

    DatasetManifest dup = m;
    dup.entries.push_back({"c.csv", 0.04, -120.0});
    CHECK_THROWS_AS(write_manifest(dir / "dup.json", dup), DataError);
}
