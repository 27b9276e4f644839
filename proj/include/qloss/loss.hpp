#pragma once

#include "qloss/bcs.hpp"

namespace qloss {

/// Saturable TLS loss parameters (interface sum lumped into one scale).
struct TlsParams {
    double q_tls0 = 0.0; // saturated inverse-loss scale, 1/(sum p_i tan d_i)
    double n_c = 0.0;    // critical photon number
    double alpha = 0.0;  // saturation exponent, [0, 1]

    void validate() const;
};

struct QpLossParams {
    double kappa = 0.0;      // excess-loss scale
    double ls_over_lm = 0.0; // kinetic / geometric inductance ratio
    double omega_r = 0.0;    // rad/s

    void validate(const GapModel& gm) const;
};

/// Per-channel inverse quality factors; inv_q_total is their exact sum.
struct LossBudget {
    double inv_q_a = 0.0;
    double inv_q_tls = 0.0;
    double inv_q_qp = 0.0;
    double inv_q_total = 0.0;
};

/// 1/Q_TLS = (1/q_tls0) tanh(hbar w / 2 kT_b) / sqrt(1 + (n_p/n_c)^alpha).
double tls_loss(double n_photon, double t_bath, const TlsParams& p, double omega_r);

/// 1/Q_QP = kappa (L_s/L_m) sigma1/sigma2 at the effective temperature.
double qp_loss(double t_qp, const QpLossParams& q, const GapModel& gm);

LossBudget total_inverse_qi(double n_photon, double t_bath, double t_qp, const TlsParams& p,
                            const QpLossParams& q, double inv_q_a, const GapModel& gm);

} // namespace qloss
