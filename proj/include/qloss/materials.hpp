#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qloss {

/// Superconductor bulk constants. Units: K, eV^-1 um^-3, s, um^-3, m/s, eV.
struct Material {
    std::string name;
    double tc = 0.0;    // critical temperature, K
    double n0 = 0.0;    // single-spin density of states at E_F, eV^-1 um^-3
    double tau0 = 0.0;  // characteristic electron-phonon time, s
    double vs = 0.0;    // speed of sound, m/s
    std::optional<double> nion;          // atomic density, um^-3
    std::optional<double> debye_energy;  // phonon cutoff, eV

    /// Zero-temperature gap 1.76 k_B T_c, eV.
    double delta0() const;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Thin-film parameters of one resonator film.
struct FilmGeometry {
    double thickness = 0.0;   // m
    double eta = 0.0;         // phonon transmission probability, (0, 1]
    double ls_over_lm = 0.0;  // kinetic / geometric inductance ratio

    void validate() const;
};

/// Temperature-independent rate constants of the quasiparticle-phonon system.
struct FilmRates {
    double recomb_r = 0.0;        // recombination rate R, um^3/s
    double pair_break_beta = 0.0; // pair-breaking rate beta, s^-1
    double escape_gamma = 0.0;    // phonon escape rate gamma, s^-1
    double eff_recomb_r = 0.0;    // r = R (1 + beta/2gamma)^-1, um^3/s

    static FilmRates make(double recomb_r, double beta, double gamma);
};

/// R = 2 (Delta0 / k_B Tc)^3 / (N(0) Delta0 tau0), um^3/s.
double recombination_rate(const Material& m);

/// gamma_esc = eta v_s / (4 d), s^-1.
double phonon_escape_rate(const Material& m, const FilmGeometry& g);

/// r = R / (1 + beta / (2 gamma)), um^3/s.
double effective_recombination(double recomb_r, double beta, double gamma);

struct MaterialEntry {
    Material material;
    FilmGeometry film;
    FilmRates rates;
    // Expected kappa for a thermal quasiparticle distribution: 1 in the
    // thin-film limit, 1/3 in the anomalous thick-film limit.
    double kappa_reference = 1.0;
};

struct MaterialRegistry {
    std::map<std::string, MaterialEntry> entries;
    // Non-fatal findings, e.g. a configured R that disagrees with the
    // closed-form recombination rate.
    std::vector<std::string> diagnostics;

    const MaterialEntry& at(const std::string& name) const;
};

/// Parses a JSON registry ({"materials": {name: {tc_K: ..., ...}}}).
/// Rates come from overrides (beta_per_s, gamma_per_s, R_um3_per_s) when
/// present; otherwise R and gamma are derived from the closed forms.
/// beta has no in-scope closed form and must be configured.
MaterialRegistry load_materials(const std::string& config_text);

/// Built-in registry with the TiN and Al film constants.
MaterialRegistry default_registry();

} // namespace qloss
