#include "qloss/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "qloss/errors.hpp"

namespace qloss {

using nlohmann::json;

void DatasetManifest::validate() const {
    if (resonator_id.empty()) throw DataError("manifest: resonator_id must not be empty");
    if (material.empty()) throw DataError("manifest: material must not be empty");
    if (entries.empty()) throw DataError("manifest: no entries");
    std::set<std::pair<double, double>> seen;
    for (const auto& e : entries) {
        if (e.file.empty()) throw DataError("manifest: entry without file");
        if (!seen.insert({e.temperature_K, e.power_dbm}).second) {
            std::ostringstream os;
            os << "manifest: duplicate (temperature, power) pair (" << e.temperature_K << " K, "
               << e.power_dbm << " dBm)";
            throw DataError(os.str());
        }
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
}

std::string content_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& err) {
        throw DataError("manifest " + path.string() + " does not parse: " + err.what());
    }
    DatasetManifest m;
    try {
        m.schema_version = j.at("schema_version").get<int>();
        m.resonator_id = j.at("resonator_id").get<std::string>();
        m.material = j.at("material").get<std::string>();
        m.material_config = j.at("material_config").dump();
        m.f_r_hint = j.value("f_r_hint_hz", 0.0);
        for (const auto& e : j.at("entries")) {
            m.entries.push_back({e.at("file").get<std::string>(),
                                 e.at("temperature_K").get<double>(),
                                 e.at("power_dBm_at_chip").get<double>()});
        }
    } catch (const json::exception& err) {
        throw DataError("manifest " + path.string() + ": " + err.what());
    }
    m.validate();
    return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
    m.validate();
    json j;
    j["schema_version"] = m.schema_version;
    j["resonator_id"] = m.resonator_id;
    j["material"] = m.material;
    j["material_config"] = json::parse(m.material_config);
    j["f_r_hint_hz"] = m.f_r_hint;
    json entries = json::array();
    for (const auto& e : m.entries) {
        entries.push_back({{"file", e.file},
                           {"temperature_K", e.temperature_K},
                           {"power_dBm_at_chip", e.power_dbm}});
    }
    j["entries"] = entries;
    write_text_file(path, j.dump(2) + "\n");
}

Spectrum read_spectrum_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "frequency_hz,s21_real,s21_imag") {
        throw DataError(path.string() + ": unexpected header '" + line + "'");
    }
    Spectrum sp;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        double f, re, im;
        char c1, c2;
        if (!(row >> f >> c1 >> re >> c2 >> im) || c1 != ',' || c2 != ',') {
            throw DataError(path.string() + ": bad row at line " + std::to_string(lineno));
        }
        sp.freqs.push_back(f);
        sp.s21.emplace_back(re, im);
    }
    sp.validate();
    return sp;
}

void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& sp) {
    sp.validate();
    std::ostringstream os;
    os.precision(17);
    os << "frequency_hz,s21_real,s21_imag\n";
    for (std::size_t i = 0; i < sp.freqs.size(); ++i) {
        os << sp.freqs[i] << ',' << sp.s21[i].real() << ',' << sp.s21[i].imag() << '\n';
    }
    write_text_file(path, os.str());
}

void to_json(json& j, const S21Params& p) {
    j = json{{"f0_hz", p.f0},
             {"q_i", p.q_i},
             {"q_c", p.q_c},
             {"phi_rad", p.phi},
             {"amp", p.amp},
             {"global_phase_rad", p.global_phase},
             {"path_phase_rate_rad_per_hz", p.path_phase_rate}};
}

void from_json(const json& j, S21Params& p) {
    p.f0 = j.at("f0_hz").get<double>();
    p.q_i = j.at("q_i").get<double>();
    p.q_c = j.at("q_c").get<double>();
    p.phi = j.at("phi_rad").get<double>();
    p.amp = j.at("amp").get<double>();
    p.global_phase = j.at("global_phase_rad").get<double>();
    p.path_phase_rate = j.at("path_phase_rate_rad_per_hz").get<double>();
}

void to_json(json& j, const ExtractionRecord& r) {
    j = json{{"source", r.source},
             {"t_bath_K", r.t_bath},
             {"p_in_dbm", r.p_in_dbm},
             {"params", r.result.params},
             {"uncertainties", r.result.uncertainties},
             {"residual_rms", r.result.residual_rms},
             {"n_photon", r.result.n_photon}};
}

void from_json(const json& j, ExtractionRecord& r) {
    r.source = j.at("source").get<std::string>();
    r.t_bath = j.at("t_bath_K").get<double>();
    r.p_in_dbm = j.at("p_in_dbm").get<double>();
    r.result.params = j.at("params").get<S21Params>();
    r.result.uncertainties = j.at("uncertainties").get<S21Params>();
    r.result.residual_rms = j.at("residual_rms").get<double>();
    r.result.n_photon = j.at("n_photon").get<double>();
}

void to_json(json& j, const TlsOnlyFit& f) {
    j = json{{"q_a", f.q_a},
             {"q_tls", f.q_tls},
             {"n_c", f.n_c},
             {"alpha", f.alpha},
             {"residual_rms", f.residual_rms},
             {"q_a_sigma", f.q_a_sigma},
             {"q_tls_sigma", f.q_tls_sigma},
             {"n_c_sigma", f.n_c_sigma},
             {"alpha_sigma", f.alpha_sigma},
             {"no_tls_signature", f.no_tls_signature},
             {"np_min", f.np_min},
             {"np_max", f.np_max}};
}

void from_json(const json& j, TlsOnlyFit& f) {
    f.q_a = j.at("q_a").get<double>();
    f.q_tls = j.at("q_tls").get<double>();
    f.n_c = j.at("n_c").get<double>();
    f.alpha = j.at("alpha").get<double>();
    f.residual_rms = j.at("residual_rms").get<double>();
    f.q_a_sigma = j.at("q_a_sigma").get<double>();
    f.q_tls_sigma = j.at("q_tls_sigma").get<double>();
    f.n_c_sigma = j.at("n_c_sigma").get<double>();
    f.alpha_sigma = j.at("alpha_sigma").get<double>();
    f.no_tls_signature = j.at("no_tls_signature").get<bool>();
    f.np_min = j.at("np_min").get<double>();
    f.np_max = j.at("np_max").get<double>();
}

void to_json(json& j, const ModelFit& f) {
    json per_power = json::array();
    for (const auto& p : f.per_power) {
        per_power.push_back({{"n_photon", p.n_photon},
                             {"s_rate_per_s", p.s_rate},
                             {"kappa", p.kappa},
                             {"s_sigma", p.s_sigma},
                             {"kappa_sigma", p.kappa_sigma},
                             {"qp_degenerate", p.qp_degenerate}});
    }
    json surface = json::array();
    for (const auto& [key, tqp] : f.tqp_surface) {
        surface.push_back({{"t_bath_K", key.first}, {"n_photon", key.second}, {"t_qp_K", tqp}});
    }
    json grid = json::array();
    for (const auto& g : f.grid) {
        grid.push_back({{"t_bath_K", g.t_bath},
                        {"n_photon", g.n_photon},
                        {"q_i", g.q_i},
                        {"masked", g.masked}});
    }
    j = json{{"q_tls0", f.tls.q_tls0},
             {"n_c", f.tls.n_c},
             {"alpha", f.tls.alpha},
             {"q_tls0_sigma", f.q_tls0_sigma},
             {"n_c_sigma", f.n_c_sigma},
             {"alpha_sigma", f.alpha_sigma},
             {"q_a", f.q_a},
             {"i_ext_per_um3_s", f.i_ext},
             {"omega_r_rad_per_s", f.omega_r},
             {"ls_over_lm", f.ls_over_lm},
             {"per_power", per_power},
             {"tqp_surface", surface},
             {"grid", grid},
             {"goodness_r2", f.goodness},
             {"residual_rms", f.residual_rms}};
}

void from_json(const json& j, ModelFit& f) {
    f.tls.q_tls0 = j.at("q_tls0").get<double>();
    f.tls.n_c = j.at("n_c").get<double>();
    f.tls.alpha = j.at("alpha").get<double>();
    f.q_tls0_sigma = j.at("q_tls0_sigma").get<double>();
    f.n_c_sigma = j.at("n_c_sigma").get<double>();
    f.alpha_sigma = j.at("alpha_sigma").get<double>();
    f.q_a = j.at("q_a").get<double>();
    f.i_ext = j.at("i_ext_per_um3_s").get<double>();
    f.omega_r = j.at("omega_r_rad_per_s").get<double>();
    f.ls_over_lm = j.at("ls_over_lm").get<double>();
    f.per_power.clear();
    for (const auto& p : j.at("per_power")) {
        PerPowerParams pp;
        pp.n_photon = p.at("n_photon").get<double>();
        pp.s_rate = p.at("s_rate_per_s").get<double>();
        pp.kappa = p.at("kappa").get<double>();
        pp.s_sigma = p.at("s_sigma").get<double>();
        pp.kappa_sigma = p.at("kappa_sigma").get<double>();
        pp.qp_degenerate = p.at("qp_degenerate").get<bool>();
        f.per_power.push_back(pp);
    }
    f.tqp_surface.clear();
    for (const auto& s : j.at("tqp_surface")) {
        f.tqp_surface.push_back({{s.at("t_bath_K").get<double>(), s.at("n_photon").get<double>()},
                                 s.at("t_qp_K").get<double>()});
    }
    f.grid.clear();
    for (const auto& g : j.at("grid")) {
        GridPoint gp;
        gp.t_bath = g.at("t_bath_K").get<double>();
        gp.n_photon = g.at("n_photon").get<double>();
        gp.q_i = g.at("q_i").get<double>();
        gp.masked = g.at("masked").get<bool>();
        f.grid.push_back(gp);
    }
    f.goodness = j.at("goodness_r2").get<double>();
    f.residual_rms = j.at("residual_rms").get<double>();
}

} // namespace qloss
