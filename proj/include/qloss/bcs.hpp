#pragma once

#include "qloss/materials.hpp"

namespace qloss {

/// BCS gap of one material. delta0 is fixed at 1.76 k_B T_c on construction.
struct GapModel {
    Material material;
    double delta0 = 0.0; // eV

    explicit GapModel(Material m) : material(std::move(m)), delta0(material.delta0()) {}
};

struct ConductivityRatio {
    double sigma1_over_sigman = 0.0;
    double sigma2_over_sigman = 0.0;
};

/// Delta(T) = Delta(0) tanh(1.74 sqrt(Tc/T - 1)); Delta(0) at T = 0,
/// 0 at T = Tc. Throws for T > Tc (normal state).
double gap(double temperature, const GapModel& gm);

/// Fermi-Dirac occupation. Exact T = 0 step; overflow-safe for large E/kT.
double fermi(double energy, double temperature);

/// Thermal quasiparticle number density, um^-3:
///   n_qp(T) = 4 N(0) Int_Delta^inf f(E,T) E / sqrt(E^2 - Delta^2) dE.
/// The gap-edge singularity is removed by E = Delta cosh(u); for
/// Delta/kT > 30 the asymptotic form 2 N(0) sqrt(2 pi kT Delta) e^(-Delta/kT)
/// is used instead.
double qp_density(double temperature, const GapModel& gm);

/// Cooper-pair number density 2 N(0) Delta(0), um^-3.
double pair_density(const GapModel& gm);

/// Pair-breaking phonon density, um^-3: Bose-Einstein occupation against a
/// Debye density of states truncated at the configured cutoff, integrated
/// from 2 Delta(T). Requires nion and debye_energy on the material.
double phonon_density_2delta(double temperature, const GapModel& gm);

/// sigma1/sigma_n at angular frequency omega (rad/s). Requires
/// hbar omega < 2 Delta(T); the photon pair-breaking regime is not modeled.
/// rel_tol controls the adaptive quadrature.
double sigma1(double omega, double temperature, const GapModel& gm, double rel_tol = 1e-8);

/// sigma2/sigma_n; same domain restrictions as sigma1.
double sigma2(double omega, double temperature, const GapModel& gm, double rel_tol = 1e-8);

ConductivityRatio conductivity(double omega, double temperature, const GapModel& gm);

} // namespace qloss
