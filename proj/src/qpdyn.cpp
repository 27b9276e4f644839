#include "qloss/qpdyn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qloss/errors.hpp"

namespace qloss {

void DriveParams::validate(const GapModel& gm) const {
    if (i_ext < 0.0) throw std::invalid_argument("DriveParams: i_ext must be >= 0");
    if (s_rate < 0.0) throw std::invalid_argument("DriveParams: s_rate must be >= 0");
    if (t_bath < 0.0 || t_bath >= gm.material.tc) {
        throw std::invalid_argument("DriveParams: t_bath must be in [0, Tc)");
    }
}

double steady_state_nqp(const DriveParams& d, const FilmRates& rates, const GapModel& gm) {
    d.validate(gm);
    const double nb = qp_density(d.t_bath, gm);
    if (d.i_ext == 0.0) return nb;
    const double r = rates.eff_recomb_r;
    const double shift = d.s_rate / (2.0 * r);
    const double root = nb + shift;
    return std::sqrt(d.i_ext / r + root * root) - shift;
}

DensityState equilibrium_state(double t_bath, const FilmRates& rates, const GapModel& gm) {
    const double nb = qp_density(t_bath, gm);
    return {nb, rates.recomb_r * nb * nb / rates.pair_break_beta};
}

namespace {

struct Deriv {
    double dn, dN;
};

// Dormand-Prince 5(4) coefficients.
constexpr double A21 = 1.0 / 5.0;
constexpr double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0;
constexpr double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0;
constexpr double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0, A53 = 64448.0 / 6561.0,
                 A54 = -212.0 / 729.0;
constexpr double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0,
                 A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0;
constexpr double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0,
                 B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0;
constexpr double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0,
                 E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0;

} // namespace

DensityState evolve_densities(const DensityState& init, const DriveParams& d,
                              const FilmRates& rates, const GapModel& gm, double t_end) {
    d.validate(gm);
    if (!(t_end > 0.0)) return init;

    const double R = rates.recomb_r;
    const double beta = rates.pair_break_beta;
    const double gamma = rates.escape_gamma;
    const DensityState eq = equilibrium_state(d.t_bath, rates, gm);

    const auto rhs = [&](double n, double N) -> Deriv {
        return {d.i_ext + beta * N - R * n * n - d.s_rate * (n - eq.nqp),
                0.5 * R * n * n - 0.5 * beta * N - gamma * (N - eq.n2d)};
    };

    const double rel_tol = 1e-9;
    // Density floor for the error norm; densities of interest are >= 1e-3.
    const double abs_tol = 1e-12;
    const double h_floor = std::max(t_end * 1e-14, 1e-20);

    double t = 0.0;
    double n = init.nqp, N = init.n2d;
    // Start below the fastest linear rate; the controller grows it.
    double h = std::min(t_end, 1e-2 / (beta + gamma + d.s_rate + 1.0));
    Deriv k1 = rhs(n, N);
    double prev_err = 1.0;

    while (t < t_end) {
        h = std::min(h, t_end - t);

        const Deriv k2 = rhs(n + h * A21 * k1.dn, N + h * A21 * k1.dN);
        const Deriv k3 = rhs(n + h * (A31 * k1.dn + A32 * k2.dn),
                             N + h * (A31 * k1.dN + A32 * k2.dN));
        const Deriv k4 = rhs(n + h * (A41 * k1.dn + A42 * k2.dn + A43 * k3.dn),
                             N + h * (A41 * k1.dN + A42 * k2.dN + A43 * k3.dN));
        const Deriv k5 = rhs(n + h * (A51 * k1.dn + A52 * k2.dn + A53 * k3.dn + A54 * k4.dn),
                             N + h * (A51 * k1.dN + A52 * k2.dN + A53 * k3.dN + A54 * k4.dN));
        const Deriv k6 =
            rhs(n + h * (A61 * k1.dn + A62 * k2.dn + A63 * k3.dn + A64 * k4.dn + A65 * k5.dn),
                N + h * (A61 * k1.dN + A62 * k2.dN + A63 * k3.dN + A64 * k4.dN + A65 * k5.dN));

        const double n5 = n + h * (B1 * k1.dn + B3 * k3.dn + B4 * k4.dn + B5 * k5.dn + B6 * k6.dn);
        const double N5 = N + h * (B1 * k1.dN + B3 * k3.dN + B4 * k4.dN + B5 * k5.dN + B6 * k6.dN);
        const Deriv k7 = rhs(n5, N5);

        const double err_n =
            h * (E1 * k1.dn + E3 * k3.dn + E4 * k4.dn + E5 * k5.dn + E6 * k6.dn + E7 * k7.dn);
        const double err_N =
            h * (E1 * k1.dN + E3 * k3.dN + E4 * k4.dN + E5 * k5.dN + E6 * k6.dN + E7 * k7.dN);

        const double scale_n = abs_tol + rel_tol * std::max(std::abs(n), std::abs(n5));
        const double scale_N = abs_tol + rel_tol * std::max(std::abs(N), std::abs(N5));
        const double err = std::sqrt(0.5 * ((err_n / scale_n) * (err_n / scale_n) +
                                            (err_N / scale_N) * (err_N / scale_N)));

        if (!std::isfinite(n5) || !std::isfinite(N5) || !std::isfinite(err)) {
            std::ostringstream os;
            os << "evolve_densities: non-finite state at t = " << t;
            throw NumericalError(os.str());
        }

        if (err <= 1.0) {
            t += h;
            n = n5;
            N = N5;
            k1 = k7; // FSAL
            // PI controller (Gustafsson).
            const double fac =
                0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) * std::pow(prev_err, 0.4 / 5.0);
            h *= std::clamp(fac, 0.2, 5.0);
            prev_err = std::max(err, 1e-10);
        } else {
            h *= std::max(0.2, 0.9 * std::pow(err, -1.0 / 5.0));
        }

        if (h < h_floor) {
            std::ostringstream os;
            os << "evolve_densities: step collapsed below the stiffness floor at t = " << t;
            throw NumericalError(os.str());
        }
    }
    return {n, N};
}

double effective_temperature(double nqp, const GapModel& gm) {
    if (nqp < 0.0) throw std::invalid_argument("effective_temperature: nqp must be >= 0");
    if (nqp == 0.0) return 0.0;

    const double t_hi = gm.material.tc * (1.0 - 1e-6);
    if (nqp >= qp_density(t_hi, gm)) {
        throw std::domain_error("effective_temperature: density exceeds thermal range");
    }

    // Bisect to a 1e-11 K bracket: comfortably inside the 1e-6 relative
    // density tolerance, and fine enough that downstream finite differences
    // see a smooth function of the target density.
    double lo = 0.0, hi = t_hi;
    for (int i = 0; i < 200 && hi - lo > 1e-11; ++i) {
        const double mid = 0.5 * (lo + hi);
        (qp_density(mid, gm) < nqp ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace qloss
