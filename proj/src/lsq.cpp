#include "qloss/lsq.hpp"

#include <cmath>
#include <limits>

#include "qloss/errors.hpp"

namespace qloss {

namespace {

Eigen::VectorXd clamp_to_box(Eigen::VectorXd x, const Eigen::VectorXd& lo,
                             const Eigen::VectorXd& hi) {
    for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = std::clamp(x[j], lo[j], hi[j]);
    return x;
}

// Forward differences, stepping backward when the forward point leaves the box.
Eigen::MatrixXd jacobian(const ResidualFn& f, const Eigen::VectorXd& x, const Eigen::VectorXd& r0,
                         const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                         const Eigen::VectorXd& fd_scale) {
    const Eigen::Index m = r0.size(), n = x.size();
    Eigen::MatrixXd J(m, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double h = fd_scale[j];
        Eigen::VectorXd xj = x;
        if (x[j] + h > hi[j]) h = -h;
        xj[j] = x[j] + h;
        J.col(j) = (f(xj) - r0) / h;
    }
    return J;
}

} // namespace

LsqResult levenberg_marquardt(const ResidualFn& residuals, Eigen::VectorXd x0,
                              const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                              const Eigen::VectorXd& fd_scale, const LsqOptions& opt) {
    const Eigen::Index n = x0.size();
    Eigen::VectorXd x = clamp_to_box(std::move(x0), lower, upper);
    Eigen::VectorXd r = residuals(x);
    double cost = 0.5 * r.squaredNorm();
    if (!std::isfinite(cost)) throw FitError("levenberg_marquardt: non-finite cost at start");

    double lambda = opt.lambda0;
    int stall = 0;
    LsqResult out;
    out.x = x;
    out.cost = cost;

    Eigen::MatrixXd J = jacobian(residuals, x, r, lower, upper, fd_scale);
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        out.iterations = iter + 1;
        const Eigen::MatrixXd jtj = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;

        Eigen::MatrixXd a = jtj;
        for (Eigen::Index j = 0; j < n; ++j) {
            a(j, j) += lambda * std::max(jtj(j, j), 1e-30);
        }
        const Eigen::VectorXd step = a.ldlt().solve(-g);
        const Eigen::VectorXd x_try = clamp_to_box(x + step, lower, upper);
        double step_rel = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            step_rel =
                std::max(step_rel, std::abs(x_try[j] - x[j]) / std::max(1.0, std::abs(x[j])));
        }
        // The proposed move is below resolution: we are at the minimum within
        // finite-difference noise whether or not it would be accepted.
        if (step_rel < opt.step_tol) {
            if (++stall >= opt.stall_iterations) {
                out.converged = true;
                break;
            }
            lambda *= 4.0;
            continue;
        }

        const Eigen::VectorXd r_try = residuals(x_try);
        const double cost_try = 0.5 * r_try.squaredNorm();

        if (std::isfinite(cost_try) && cost_try <= cost) {
            const double rel_drop = (cost - cost_try) / std::max(cost, 1e-300);
            x = x_try;
            r = r_try;
            cost = cost_try;
            lambda = std::max(lambda / 3.0, 1e-12);
            J = jacobian(residuals, x, r, lower, upper, fd_scale);
            stall = rel_drop < opt.rel_cost_tol ? stall + 1 : 0;
            if (stall >= opt.stall_iterations) {
                out.converged = true;
                break;
            }
        } else {
            lambda *= 4.0;
            if (lambda > 1e14) {
                // No acceptable move at any damping: the cost surface is flat
                // to within evaluation noise around the current point.
                out.converged = true;
                break;
            }
        }
    }

    out.x = x;
    out.cost = cost;

    // Covariance from the final curvature, ridge-stabilised if degenerate.
    const Eigen::Index m = r.size();
    Eigen::MatrixXd jtj = J.transpose() * J;
    for (Eigen::Index j = 0; j < n; ++j) jtj(j, j) += 1e-30;
    const double dof = static_cast<double>(m > n ? m - n : 1);
    const double variance = 2.0 * cost / dof;
    out.covariance = jtj.ldlt().solve(Eigen::MatrixXd::Identity(n, n)) * variance;
    return out;
}

std::vector<Eigen::VectorXd> multi_start_points(const Eigen::VectorXd& x0,
                                                const Eigen::VectorXd& lower,
                                                const Eigen::VectorXd& upper, int count) {
    std::vector<Eigen::VectorXd> starts;
    starts.push_back(x0);
    constexpr double phi = 0.6180339887498949;
    for (int k = 1; k < count; ++k) {
        Eigen::VectorXd x = x0;
        for (Eigen::Index j = 0; j < x0.size(); ++j) {
            if (!std::isfinite(lower[j]) || !std::isfinite(upper[j])) continue;
            double frac = std::fmod(0.5 + phi * k + 0.3819660112501051 * (j + 1), 1.0);
            // Keep starts off the exact box edges.
            frac = 0.05 + 0.9 * frac;
            x[j] = lower[j] + frac * (upper[j] - lower[j]);
        }
        starts.push_back(x);
    }
    return starts;
}

LsqResult fit_multi_start(const ResidualFn& residuals, const std::vector<Eigen::VectorXd>& starts,
                          const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                          const Eigen::VectorXd& fd_scale, const LsqOptions& opt) {
    LsqResult best;
    bool have = false;
    for (const auto& s : starts) {
        LsqResult res;
        try {
            res = levenberg_marquardt(residuals, s, lower, upper, fd_scale, opt);
        } catch (const FitError&) {
            continue;
        }
        if (!have || res.cost < best.cost) {
            best = res;
            have = true;
        }
    }
    if (!have) throw FitError("fit_multi_start: every start failed");
    return best;
}

} // namespace qloss
