#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "qloss/errors.hpp"

namespace qloss {

// Adaptive Gauss-Kronrod 7-15 on a finite interval. The integrand must be
// smooth; singular endpoints are expected to have been removed by a change
// of variables before calling this.
namespace detail {

// 15-point Kronrod nodes/weights on [-1, 1] with the embedded 7-point Gauss
// rule (Abscissae from QUADPACK dqk15).
inline constexpr double gk_nodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
inline constexpr double gk_wk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
inline constexpr double gk_wg[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

template <class F>
inline void gk15(const F& f, double a, double b, double& integral, double& err) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fk = 0.0, fg = 0.0;
    for (int i = 0; i < 8; ++i) {
        const double x = h * gk_nodes[i];
        double v;
        if (i == 7) {
            v = f(c);
            fg += gk_wg[3] * v;
        } else {
            v = f(c - x) + f(c + x);
            if (i % 2 == 1) fg += gk_wg[i / 2] * v;
        }
        fk += gk_wk[i] * v;
    }
    integral = fk * h;
    err = std::abs((fk - fg) * h);
}

} // namespace detail

struct QuadratureOptions {
    double rel_tol = 1e-8;
    double abs_tol = 0.0;
    int max_depth = 40;
};

/// Integrates f over [a, b] by recursive interval bisection of the GK15 rule.
/// Throws NumericalError if the recursion depth limit is hit before the
/// error estimate satisfies max(abs_tol, rel_tol * |result|).
template <class F>
double integrate(const F& f, double a, double b, const QuadratureOptions& opt = {}) {
    if (!(b > a)) return 0.0;

    struct Segment {
        double a, b, value, err;
        int depth;
    };
    double whole, werr;
    detail::gk15(f, a, b, whole, werr);

    // Iterative refinement: keep a small stack of segments, split the ones
    // whose error still matters.
    std::vector<Segment> stack{{a, b, whole, werr, 0}};
    double total = whole;
    double total_err = werr;
    while (total_err > std::max(opt.abs_tol, opt.rel_tol * std::abs(total))) {
        // split the worst segment
        std::size_t worst = 0;
        for (std::size_t i = 1; i < stack.size(); ++i) {
            if (stack[i].err > stack[worst].err) worst = i;
        }
        Segment seg = stack[worst];
        if (seg.depth >= opt.max_depth) {
            throw NumericalError("quadrature failed to converge (depth limit)");
        }
        const double mid = 0.5 * (seg.a + seg.b);
        Segment left{seg.a, mid, 0, 0, seg.depth + 1};
        Segment right{mid, seg.b, 0, 0, seg.depth + 1};
        detail::gk15(f, left.a, left.b, left.value, left.err);
        detail::gk15(f, right.a, right.b, right.value, right.err);
        total += left.value + right.value - seg.value;
        total_err += left.err + right.err - seg.err;
        stack[worst] = left;
        stack.push_back(right);
        if (stack.size() > 4096) {
            throw NumericalError("quadrature failed to converge (segment limit)");
        }
    }
    return total;
}

} // namespace qloss
