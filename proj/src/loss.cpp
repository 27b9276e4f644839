#include "qloss/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "qloss/constants.hpp"

namespace qloss {

using constants::hbar;
using constants::k_B;

void TlsParams::validate() const {
    if (!(q_tls0 > 0.0)) throw std::invalid_argument("TlsParams: q_tls0 must be positive");
    if (!(n_c > 0.0)) throw std::invalid_argument("TlsParams: n_c must be positive");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("TlsParams: alpha must be in [0, 1]");
}

void QpLossParams::validate(const GapModel& gm) const {
    if (!(kappa > 0.0)) throw std::invalid_argument("QpLossParams: kappa must be positive");
    if (!(ls_over_lm > 0.0)) throw std::invalid_argument("QpLossParams: ls_over_lm must be positive");
    if (!(omega_r > 0.0)) throw std::invalid_argument("QpLossParams: omega_r must be positive");
    if (hbar * omega_r >= 2.0 * gm.delta0) {
        throw std::invalid_argument("QpLossParams: hbar omega_r must be below 2 Delta(0)");
    }
}

double tls_loss(double n_photon, double t_bath, const TlsParams& p, double omega_r) {
    if (n_photon < 0.0) throw std::invalid_argument("tls_loss: n_photon must be >= 0");
    if (!(t_bath > 0.0)) throw std::invalid_argument("tls_loss: t_bath must be positive");
    const double thermal = std::tanh(hbar * omega_r / (2.0 * k_B * t_bath));
    const double saturation = std::sqrt(1.0 + std::pow(n_photon / p.n_c, p.alpha));
    return thermal / (p.q_tls0 * saturation);
}

double qp_loss(double t_qp, const QpLossParams& q, const GapModel& gm) {
    if (t_qp <= 0.0) return 0.0;
    return q.kappa * q.ls_over_lm * sigma1(q.omega_r, t_qp, gm) / sigma2(q.omega_r, t_qp, gm);
}

LossBudget total_inverse_qi(double n_photon, double t_bath, double t_qp, const TlsParams& p,
                            const QpLossParams& q, double inv_q_a, const GapModel& gm) {
    if (inv_q_a < 0.0) throw std::invalid_argument("total_inverse_qi: inv_q_a must be >= 0");
    LossBudget b;
    b.inv_q_a = inv_q_a;
    b.inv_q_tls = tls_loss(n_photon, t_bath, p, q.omega_r);
    b.inv_q_qp = qp_loss(t_qp, q, gm);
    b.inv_q_total = b.inv_q_a + b.inv_q_tls + b.inv_q_qp;
    return b;
}

} // namespace qloss
