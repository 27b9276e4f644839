#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "qloss/bcs.hpp"
#include "qloss/loss.hpp"

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

constexpr double kOmegaTin = 2.0 * 3.14159265358979323846 * 4.74e9;

} // namespace

TEST_CASE("tls loss saturates with power") {
    const TlsParams p{1.7e5, 1.46, 0.57};
    CHECK(tls_loss(1e30, 0.04, p, kOmegaTin) < 1e-6 / p.q_tls0);
}

TEST_CASE("tls loss cold unsaturated limit is 1/q_tls0") {
    const TlsParams p{1.7e5, 1.46, 0.57};
    CHECK(tls_loss(0.0, 1e-6, p, kOmegaTin) == doctest::Approx(1.0 / p.q_tls0).epsilon(1e-12));
}

TEST_CASE("tls loss matches the paper-parameter arithmetic") {
    const TlsParams p{1.7e5, 1.46, 0.57};
    CHECK(tls_loss(10.0, 0.04, p, kOmegaTin) == doctest::Approx(2.92e-6).epsilon(0.01));
}

TEST_CASE("tls loss is nonincreasing in power and temperature") {
    const TlsParams p{1.7e5, 1.46, 0.57};
    double prev = 1e300;
    for (const double np : {0.0, 1.0, 10.0, 1e3, 1e6}) {
        const double v = tls_loss(np, 0.04, p, kOmegaTin);
        CHECK(v <= prev);
        prev = v;
    }
    prev = 1e300;
    for (const double tb : {0.01, 0.1, 0.5, 1.0}) {
        const double v = tls_loss(10.0, tb, p, kOmegaTin);
        CHECK(v <= prev);
        prev = v;
    }
}

TEST_CASE("qp loss composes the conductivity kernels") {
    const GapModel gm = tin_gap();
    const QpLossParams q{1.0, 0.1, kOmegaTin};
    const double expected = 0.1 * sigma1(kOmegaTin, 0.849, gm) / sigma2(kOmegaTin, 0.849, gm);
    CHECK(qp_loss(0.849, q, gm) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("qp loss vanishes with the kinetic fraction and at low temperature") {
    const GapModel gm = tin_gap();
    QpLossParams q{1.0, 1e-12, kOmegaTin};
    CHECK(qp_loss(0.849, q, gm) < 1e-12);
    q.ls_over_lm = 0.1;
    CHECK(qp_loss(1e-3, q, gm) < 1e-15);
    QpLossParams bad{1.0, 0.0, kOmegaTin};
    CHECK_THROWS_AS(bad.validate(gm), std::invalid_argument);
}

TEST_CASE("the loss budget is additive at machine precision") {
    const GapModel gm = tin_gap();
    const TlsParams p{1.7e5, 1.46, 0.57};
    const QpLossParams q{1.0, 0.4, kOmegaTin};
    const LossBudget b = total_inverse_qi(10.0, 0.04, 0.849, p, q, 5e-8, gm);
    CHECK(b.inv_q_total == b.inv_q_a + b.inv_q_tls + b.inv_q_qp);
    CHECK(b.inv_q_a >= 0.0);
    CHECK(b.inv_q_tls >= 0.0);
    CHECK(b.inv_q_qp >= 0.0);
    CHECK(b.inv_q_a <= b.inv_q_total);
    CHECK(b.inv_q_tls <= b.inv_q_total);
    CHECK(b.inv_q_qp <= b.inv_q_total);
}

TEST_CASE("only the constant channel survives when the others are off") {
    const GapModel gm = tin_gap();
    const TlsParams p{1e30, 1.46, 0.57}; // negligible TLS scale
    const QpLossParams q{1e-30, 1e-30, kOmegaTin};
    const LossBudget b = total_inverse_qi(0.0, 1e-6, 1e-6, p, q, 5e-8, gm);
    CHECK(b.inv_q_total == doctest::Approx(5e-8).epsilon(1e-9));
}

TEST_CASE("Q_i never exceeds Q_A") {
    const GapModel gm = tin_gap();
    const TlsParams p{1.7e5, 1.46, 0.57};
    const QpLossParams q{1.0, 0.4, kOmegaTin};
    const double inv_qa = 5e-8;
    for (const double np : {1.0, 1e3, 1e6}) {
        for (const double tb : {0.04, 0.3, 1.0}) {
            const LossBudget b = total_inverse_qi(np, tb, std::max(tb, 0.7), p, q, inv_qa, gm);
            CHECK(1.0 / b.inv_q_total <= 1.0 / inv_qa);
        }
    }
}
