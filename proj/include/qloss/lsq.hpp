#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace qloss {

struct LsqOptions {
    int max_iterations = 400;
    double rel_cost_tol = 1e-10; // relative cost change per iteration
    double step_tol = 1e-12;     // relative step infinity-norm
    int stall_iterations = 3;    // consecutive quiet iterations to converge
    double lambda0 = 1e-3;
};

struct LsqResult {
    Eigen::VectorXd x;
    double cost = 0.0;          // 0.5 * sum of squared residuals
    Eigen::MatrixXd covariance; // (J^T J)^-1 scaled by the residual variance
    int iterations = 0;
    bool converged = false;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Levenberg-Marquardt with a forward-difference Jacobian and box projection.
/// `fd_scale` holds per-parameter absolute difference steps (the caller knows
/// each parameter's characteristic scale). Bounds may be +-infinity.
LsqResult levenberg_marquardt(const ResidualFn& residuals, Eigen::VectorXd x0,
                              const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                              const Eigen::VectorXd& fd_scale, const LsqOptions& opt = {});

/// Deterministic multi-start locations: element 0 is x0 itself, the rest are
/// spread through the box by a golden-ratio lattice. Unbounded coordinates
/// stay at x0.
std::vector<Eigen::VectorXd> multi_start_points(const Eigen::VectorXd& x0,
                                                const Eigen::VectorXd& lower,
                                                const Eigen::VectorXd& upper, int count);

/// Runs LM from every start and returns the lowest-cost result.
LsqResult fit_multi_start(const ResidualFn& residuals, const std::vector<Eigen::VectorXd>& starts,
                          const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                          const Eigen::VectorXd& fd_scale, const LsqOptions& opt = {});

} // namespace qloss
