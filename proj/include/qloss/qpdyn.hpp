#pragma once

#include "qloss/bcs.hpp"
#include "qloss/materials.hpp"

namespace qloss {

/// External drive and relaxation acting on the quasiparticle system.
struct DriveParams {
    double i_ext = 0.0;  // generation rate, um^-3 s^-1
    double s_rate = 0.0; // single-quasiparticle relaxation/trapping rate, s^-1
    double t_bath = 0.0; // K

    void validate(const GapModel& gm) const;
};

struct DensityState {
    double nqp = 0.0; // quasiparticle density, um^-3
    double n2d = 0.0; // pair-breaking phonon density, um^-3
};

/// Closed-form steady state of the homogeneous rate equations:
///   n_qp = sqrt(I_ext/r + (n_qp(T_b) + s/2r)^2) - s/2r,  r = R (1 + beta/2gamma)^-1.
double steady_state_nqp(const DriveParams& d, const FilmRates& rates, const GapModel& gm);

/// Equilibrium anchor used by the dynamics: thermal n_qp(T_b) together with
/// the detailed-balance phonon density beta N = R n^2.
DensityState equilibrium_state(double t_bath, const FilmRates& rates, const GapModel& gm);

/// Integrates the coupled quasiparticle/phonon rate equations (no diffusion)
/// from `init` to t_end with an adaptive Dormand-Prince 4(5) stepper,
/// per-step relative tolerance 1e-9. Throws NumericalError with the offending
/// time if the state leaves the finite range or the step collapses below the
/// stiffness floor.
DensityState evolve_densities(const DensityState& init, const DriveParams& d,
                              const FilmRates& rates, const GapModel& gm, double t_end);

/// Inverts qp_density: the unique T in [0, Tc) with n_qp(T) = nqp, found by
/// bisection (relative density tolerance 1e-6). nqp = 0 maps to 0 K.
double effective_temperature(double nqp, const GapModel& gm);

} // namespace qloss
