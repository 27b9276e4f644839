#include <doctest.h>

#include <cmath>

#include "qloss/errors.hpp"
#include "qloss/qpdyn.hpp"

using namespace qloss;

namespace {

GapModel tin_gap() {
    Material m;
    m.name = "TiN";
    m.tc = 5.3;
    m.n0 = 2.96e10;
    m.tau0 = 5.5e-9;
    m.vs = 3310.0;
    return GapModel(m);
}

FilmRates tin_rates() { return FilmRates::make(83.3, 2.47e9, 2.49e9); }

// Steady state of the phonon equation given n, used to seed fixed-point tests.
double phonon_steady(double n, double t_bath, const FilmRates& fr, const GapModel& gm) {
    const DensityState eq = equilibrium_state(t_bath, fr, gm);
    return (0.5 * fr.recomb_r * n * n + fr.escape_gamma * eq.n2d) /
           (0.5 * fr.pair_break_beta + fr.escape_gamma);
}

} // namespace

TEST_CASE("steady state collapses to the thermal density without drive") {
    const GapModel gm = tin_gap();
    const FilmRates fr = tin_rates();
    for (const double s : {0.0, 1e2, 1e6}) {
        const double nb = qp_density(0.6, gm);
        CHECK(steady_state_nqp({0.0, s, 0.6}, fr, gm) == nb);
    }
}

TEST_CASE("steady state reproduces sqrt(I/r) in the cold, trap-free limit") {
    const GapModel gm = tin_gap();
    const FilmRates fr = tin_rates();
    const double n = steady_state_nqp({2.4e6, 0.0, 1e-3}, fr, gm);
    CHECK(n == doctest::Approx(207.6).epsilon(0.005));
}

TEST_CASE("steady state is monotone in drive and trapping") {
    const GapModel gm = tin_gap();
    const FilmRates fr = tin_rates();
    double prev = 0.0;
    for (const double i_ext : {1e3, 1e5, 1e7, 1e9}) {
        const double n = steady_state_nqp({i_ext, 1e3, 0.1}, fr, gm);
        CHECK(n > prev);
        prev = n;
    }
    prev = 1e300;
    for (const double s : {0.0, 1e2, 1e4, 1e6}) {
        const double n = steady_state_nqp({1e6, s, 0.1}, fr, gm);
        CHECK(n < prev);
        prev = n;
    }
}

TEST_CASE("the rate equations hold their fixed point") {
    const GapModel gm = tin_gap();
    const FilmRates fr = tin_rates();
    const DriveParams d{2.4e6, 500.0, 0.3};
    const double n_star = steady_state_nqp(d, fr, gm);
    const DensityState init{n_star, phonon_steady(n_star, d.t_bath, fr, gm)};
    const DensityState out = evolve_densities(init, d, fr, gm, 1e-4);
    CHECK(out.nqp == doctest::Approx(init.nqp).epsilon(1e-6));
    CHECK(out.n2d == doctest::Approx(init.n2d).epsilon(1e-6));
}

TEST_CASE("undriven equilibrium is preserved by detailed balance") {
    const GapModel gm = tin_gap();
    const FilmRates fr = tin_rates();
    const DensityState eq = equilibrium_state(0.5, fr, gm);
    const DensityState out = evolve_densities(eq, {0.0, 0.0, 0.5}, fr, gm, 1e-4);
    CHECK(out.nqp == doctest::Approx(eq.nqp).epsilon(1e-9));
    CHECK(out.n2d == doctest::Approx(eq.n2d).epsilon(1e-9));
}

TEST_CASE("the ODE long-time limit is the closed-form steady state") {
    const GapModel gm = tin_gap();
    const FilmRates fr = tin_rates();
    const DriveParams d{2.4e6, 0.0, 1e-3};
    const double n_closed = steady_state_nqp(d, fr, gm);
    const double t_end = 100.0 / (fr.eff_recomb_r * n_closed);
    const DensityState out = evolve_densities(equilibrium_state(d.t_bath, fr, gm), d, fr, gm, t_end);
    CHECK(out.nqp == doctest::Approx(n_closed).epsilon(1e-3));
}

TEST_CASE("closed form and ODE agree across a reduced grid") {
    // The full 45-point grid runs in the acceptance suite.
    const GapModel gm = tin_gap();
    const FilmRates fr = tin_rates();
    for (const double i_ext : {1e4, 1e7}) {
        for (const double s : {0.0, 1e4}) {
            for (const double frac : {0.01, 0.2}) {
                const DriveParams d{i_ext, s, frac * gm.material.tc};
                const double n_closed = steady_state_nqp(d, fr, gm);
                const double rate = 2.0 * fr.eff_recomb_r * n_closed + s + 1e-3;
                const DensityState out =
                    evolve_densities(equilibrium_state(d.t_bath, fr, gm), d, fr, gm, 30.0 / rate);
                CHECK(out.nqp == doctest::Approx(n_closed).epsilon(1e-3));
            }
        }
    }
}

TEST_CASE("a diverging state reports a numerical error") {
    const GapModel gm = tin_gap();
    const FilmRates fr = tin_rates();
    CHECK_THROWS_AS(evolve_densities({1e200, 0.0}, {0.0, 0.0, 0.1}, fr, gm, 1.0), NumericalError);
}

TEST_CASE("effective temperature inverts the thermal density") {
    const GapModel gm = tin_gap();
    CHECK(effective_temperature(0.0, gm) == 0.0);

    const double t = 0.849;
    const double n = qp_density(t, gm);
    CHECK(effective_temperature(n, gm) == doctest::Approx(t).epsilon(1e-4 / t));

    const double t_from_paper_density = effective_temperature(678.0, gm);
    CHECK(t_from_paper_density > 0.849 - 0.030);
    CHECK(t_from_paper_density < 0.849 + 0.030);
}

TEST_CASE("effective temperature is monotone and range-checked") {
    const GapModel gm = tin_gap();
    double prev = 0.0;
    for (const double n : {1.0, 100.0, 1e4, 1e6}) {
        const double t = effective_temperature(n, gm);
        CHECK(t > prev);
        prev = t;
    }
    CHECK_THROWS_AS(effective_temperature(1e30, gm), std::domain_error);
}
