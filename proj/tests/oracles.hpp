// Test-only reference evaluations, independent of the library's quadrature:
// different changes of variables, plain dense trapezoid sums. Used to pin the
// integral kernels without sharing their code path.
#pragma once

#include <cmath>
#include <functional>

#include "qloss/bcs.hpp"
#include "qloss/constants.hpp"

namespace oracles {

inline double trapezoid(const std::function<double(double)>& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double sum = 0.5 * (f(a) + f(b));
    for (int i = 1; i < n; ++i) sum += f(a + i * h);
    return sum * h;
}

inline double fermi_ref(double e, double t) {
    const double x = e / (qloss::constants::k_B * t);
    return x > 700.0 ? 0.0 : 1.0 / (std::exp(x) + 1.0);
}

// n_qp via E = Delta (1 + y^2): sqrt(E^2-D^2) = D y sqrt(2+y^2).
inline double qp_density_ref(double t, const qloss::GapModel& gm, int n = 200000) {
    const double d = qloss::gap(t, gm);
    const double kt = qloss::constants::k_B * t;
    const double ymax = std::sqrt(45.0 * kt / d);
    const double integral = trapezoid(
        [&](double y) {
            const double e = d * (1.0 + y * y);
            return 2.0 * fermi_ref(e, t) * e / std::sqrt(2.0 + y * y);
        },
        0.0, ymax, n);
    return 4.0 * gm.material.n0 * integral;
}

// sigma1 via the same quadratic stretching.
inline double sigma1_ref(double omega, double t, const qloss::GapModel& gm, int n = 400000) {
    const double d = qloss::gap(t, gm);
    const double hw = qloss::constants::hbar * omega;
    const double kt = qloss::constants::k_B * t;
    const double ymax = std::sqrt(40.0 * kt / d);
    const double integral = trapezoid(
        [&](double y) {
            const double e = d * (1.0 + y * y);
            const double occ = fermi_ref(e, t) - fermi_ref(e + hw, t);
            const double num = e * e + d * d + hw * e;
            return 2.0 * occ * num /
                   (std::sqrt(2.0 + y * y) * std::sqrt((e + hw) * (e + hw) - d * d));
        },
        0.0, ymax, n);
    return 2.0 / hw * integral;
}

// sigma2 via E = (Delta - hw) + hw sin^2(theta), which clears both edges at
// once (the implementation splits the interval instead).
inline double sigma2_ref(double omega, double t, const qloss::GapModel& gm, int n = 400000) {
    const double d = qloss::gap(t, gm);
    const double hw = qloss::constants::hbar * omega;
    const double integral = trapezoid(
        [&](double th) {
            const double s = std::sin(th);
            const double e = (d - hw) + hw * s * s;
            const double occ = 1.0 - 2.0 * fermi_ref(e + hw, t);
            const double num = e * e + d * d + hw * e;
            return 2.0 * occ * num / std::sqrt((d + e) * (e + hw + d));
        },
        0.0, 0.5 * M_PI, n);
    return integral / hw;
}

// Pair-breaking phonon density by direct dense trapezoid (no singularity).
inline double phonon_density_ref(double t, const qloss::GapModel& gm, int n = 400000) {
    const double d = qloss::gap(t, gm);
    const double omega_d = *gm.material.debye_energy;
    const double kt = qloss::constants::k_B * t;
    const double lower = 2.0 * d;
    if (lower >= omega_d) return 0.0;
    const double upper = std::min(omega_d, lower + 50.0 * kt);
    const double integral = trapezoid(
        [&](double w) {
            return 3.0 * w * w / (omega_d * omega_d * omega_d) /
                   (std::exp(w / kt) - 1.0);
        },
        lower, upper, n);
    return *gm.material.nion * integral;
}

} // namespace oracles
