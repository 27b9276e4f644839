#include "qloss/bcs.hpp"

#include <cmath>
#include <stdexcept>

#include "qloss/constants.hpp"
#include "qloss/errors.hpp"
#include "qloss/quadrature.hpp"

namespace qloss {

using constants::hbar;
using constants::k_B;

double gap(double temperature, const GapModel& gm) {
    const double tc = gm.material.tc;
    if (temperature > tc) throw std::domain_error("gap: T > Tc (normal state)");
    if (temperature <= 0.0) return gm.delta0;
    if (temperature == tc) return 0.0;
    return gm.delta0 * std::tanh(1.74 * std::sqrt(tc / temperature - 1.0));
}

double fermi(double energy, double temperature) {
    if (temperature <= 0.0) {
        if (energy > 0.0) return 0.0;
        if (energy < 0.0) return 1.0;
        return 0.5;
    }
    const double x = energy / (k_B * temperature);
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return e / (1.0 + e);
    }
    return 1.0 / (std::exp(x) + 1.0);
}

double qp_density(double temperature, const GapModel& gm) {
    if (temperature >= gm.material.tc) throw std::domain_error("qp_density: T >= Tc");
    if (temperature <= 0.0) return 0.0;

    const double delta = gap(temperature, gm);
    const double kt = k_B * temperature;
    const double x0 = delta / kt;
    const double n0 = gm.material.n0;

    if (x0 > 30.0) {
        if (x0 > 700.0) return 0.0;
        return 2.0 * n0 * std::sqrt(2.0 * M_PI * kt * delta) * std::exp(-x0);
    }

    // E = Delta cosh(u) removes the inverse-square-root edge; the occupation
    // is below 1e-16 of its gap-edge value past E = Delta + 45 kT.
    const double umax = std::acosh(1.0 + 45.0 * kt / delta);
    const double integral = integrate(
        [&](double u) {
            const double e = delta * std::cosh(u);
            return fermi(e, temperature) * e;
        },
        0.0, umax, {1e-10, 0.0, 40});
    return 4.0 * n0 * integral;
}

double pair_density(const GapModel& gm) { return 2.0 * gm.material.n0 * gm.delta0; }

double phonon_density_2delta(double temperature, const GapModel& gm) {
    if (!gm.material.nion || !gm.material.debye_energy) {
        throw ConfigError("phonon_density_2delta: material '" + gm.material.name +
                          "' needs nion_per_um3 and debye_energy_eV");
    }
    if (temperature >= gm.material.tc) throw std::domain_error("phonon_density_2delta: T >= Tc");
    if (temperature <= 0.0) return 0.0;

    const double omega_d = *gm.material.debye_energy;
    const double lower = 2.0 * gap(temperature, gm);
    if (lower >= omega_d) return 0.0;

    const double kt = k_B * temperature;
    // Bose factor is dead 50 kT past the threshold.
    const double upper = std::min(omega_d, lower + 50.0 * kt);
    if (lower / kt > 700.0) return 0.0;

    const double norm = 3.0 / (omega_d * omega_d * omega_d);
    const double integral = integrate(
        [&](double w) {
            const double e = std::exp(-w / kt);
            return e / (1.0 - e) * norm * w * w;
        },
        lower, upper, {1e-10, 0.0, 40});
    return *gm.material.nion * integral;
}

namespace {

struct MbSetup {
    double delta;  // eV
    double hw;     // eV
    double kt;     // eV (0 allowed for sigma2)
};

MbSetup mb_setup(double omega, double temperature, const GapModel& gm) {
    if (temperature >= gm.material.tc) throw std::domain_error("conductivity: T >= Tc");
    const double delta = gap(std::max(temperature, 0.0), gm);
    const double hw = hbar * omega;
    if (hw <= 0.0) throw std::domain_error("conductivity: omega must be positive");
    if (hw >= 2.0 * delta) {
        throw std::domain_error("conductivity: pair-breaking regime not modeled (hbar omega >= 2 Delta)");
    }
    return {delta, hw, k_B * std::max(temperature, 0.0)};
}

} // namespace

double sigma1(double omega, double temperature, const GapModel& gm, double rel_tol) {
    const MbSetup s = mb_setup(omega, temperature, gm);
    if (temperature <= 0.0) return 0.0;

    // E = Delta cosh(u); the remaining factor is regular at the gap edge.
    const double umax = std::acosh(1.0 + 40.0 * s.kt / s.delta);
    const double d2 = s.delta * s.delta;
    const double integral = integrate(
        [&](double u) {
            const double e = s.delta * std::cosh(u);
            const double occ = fermi(e, temperature) - fermi(e + s.hw, temperature);
            const double num = e * e + d2 + s.hw * e;
            return occ * num / std::sqrt((e + s.hw) * (e + s.hw) - d2);
        },
        0.0, umax, {rel_tol, 0.0, 40});
    return 2.0 / s.hw * integral;
}

double sigma2(double omega, double temperature, const GapModel& gm, double rel_tol) {
    const MbSetup s = mb_setup(omega, temperature, gm);
    const double d2 = s.delta * s.delta;
    const double mid = s.delta - 0.5 * s.hw;

    // Lower half [Delta - hw, mid]: E = Delta cosh(v) - hw clears the
    // (E + hw)^2 - Delta^2 root at the bottom edge.
    const double vmax = std::acosh((mid + s.hw) / s.delta);
    const double lower = integrate(
        [&](double v) {
            const double e = s.delta * std::cosh(v) - s.hw;
            const double occ = 1.0 - 2.0 * fermi(e + s.hw, temperature);
            const double num = e * e + d2 + s.hw * e;
            return occ * num / std::sqrt(d2 - e * e);
        },
        0.0, vmax, {rel_tol, 0.0, 40});

    // Upper half [mid, Delta]: E = Delta sin(theta) clears the
    // Delta^2 - E^2 root at the top edge.
    const double theta0 = std::asin(mid / s.delta);
    const double upper = integrate(
        [&](double th) {
            const double e = s.delta * std::sin(th);
            const double occ = 1.0 - 2.0 * fermi(e + s.hw, temperature);
            const double num = e * e + d2 + s.hw * e;
            return occ * num / std::sqrt((e + s.hw) * (e + s.hw) - d2);
        },
        theta0, 0.5 * M_PI, {rel_tol, 0.0, 40});

    return (lower + upper) / s.hw;
}

ConductivityRatio conductivity(double omega, double temperature, const GapModel& gm) {
    return {sigma1(omega, temperature, gm), sigma2(omega, temperature, gm)};
}

} // namespace qloss
