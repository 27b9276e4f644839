#include "qloss/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "qloss/constants.hpp"
#include "qloss/errors.hpp"
#include "qloss/lsq.hpp"
#include "qloss/qpdyn.hpp"

namespace qloss {

void PowerSeries::validate() const {
    if (points.size() < 4) throw DataError("PowerSeries: need at least 4 points");
    double lo = points.front().n_photon, hi = lo;
    for (const auto& p : points) {
        if (!(p.n_photon > 0.0)) throw DataError("PowerSeries: n_photon must be positive");
        if (!(p.q_i > 0.0)) throw DataError("PowerSeries: q_i must be positive");
        lo = std::min(lo, p.n_photon);
        hi = std::max(hi, p.n_photon);
    }
    if (hi / lo < 100.0) throw DataError("PowerSeries: points must span at least two decades");
}

namespace {

constexpr double kQaLo = 1e5, kQaHi = 1e9;
constexpr double kQtlsLo = 1e3, kQtlsHi = 1e12;
constexpr double kNcLo = 1e-3, kNcHi = 1e6;

struct SeriesData {
    std::vector<double> np, inv, w; // photon number, 1/Q_I, residual weight
};

SeriesData series_data(const PowerSeries& ps) {
    SeriesData d;
    bool have_sigma = true;
    for (const auto& p : ps.points) have_sigma = have_sigma && p.q_i_sigma > 0.0;
    for (const auto& p : ps.points) {
        d.np.push_back(p.n_photon);
        d.inv.push_back(1.0 / p.q_i);
        // sigma(1/Q) = sigma_Q / Q^2; without uncertainties fall back to
        // relative weighting.
        d.w.push_back(have_sigma ? p.q_i * p.q_i / p.q_i_sigma : p.q_i);
    }
    return d;
}

double saturation(double np, double n_c, double alpha) {
    return 1.0 / std::sqrt(1.0 + std::pow(np / n_c, alpha));
}

// Weighted linear solve for (a, b) in inv ~ a + b g at fixed shape, with box
// clamping. Returns the weighted cost.
double solve_amplitudes(const SeriesData& d, const std::vector<double>& g, double& a, double& b) {
    double sww = 0, swg = 0, sgg = 0, swy = 0, sgy = 0;
    for (std::size_t i = 0; i < d.np.size(); ++i) {
        const double w2 = d.w[i] * d.w[i];
        sww += w2;
        swg += w2 * g[i];
        sgg += w2 * g[i] * g[i];
        swy += w2 * d.inv[i];
        sgy += w2 * g[i] * d.inv[i];
    }
    const double det = sww * sgg - swg * swg;
    const auto cost = [&](double aa, double bb) {
        double c = 0.0;
        for (std::size_t i = 0; i < d.np.size(); ++i) {
            const double r = d.w[i] * (aa + bb * g[i] - d.inv[i]);
            c += r * r;
        }
        return 0.5 * c;
    };

    const double a_lo = 1.0 / kQaHi, a_hi = 1.0 / kQaLo;
    const double b_lo = 1.0 / kQtlsHi, b_hi = 1.0 / kQtlsLo;
    double best_cost = std::numeric_limits<double>::infinity();
    const auto consider = [&](double aa, double bb) {
        aa = std::clamp(aa, a_lo, a_hi);
        bb = std::clamp(bb, b_lo, b_hi);
        const double c = cost(aa, bb);
        if (c < best_cost) {
            best_cost = c;
            a = aa;
            b = bb;
        }
    };
    if (std::abs(det) > 1e-300) {
        consider((sgg * swy - swg * sgy) / det, (sww * sgy - swg * swy) / det);
    }
    // Edge candidates: one amplitude pinned, the other re-solved.
    for (const double aa : {a_lo, a_hi}) consider(aa, (sgy - aa * swg) / std::max(sgg, 1e-300));
    for (const double bb : {b_lo, b_hi}) consider((swy - bb * swg) / std::max(sww, 1e-300), bb);
    return best_cost;
}

} // namespace

TlsOnlyFit fit_power_series(const PowerSeries& ps) {
    ps.validate();
    const SeriesData d = series_data(ps);
    const std::size_t m = d.np.size();

    // Variable projection over the (n_c, alpha) shape; amplitudes are linear.
    const auto shape_residuals = [&](const Eigen::VectorXd& x) {
        const double n_c = std::exp(x[0]);
        const double alpha = x[1];
        std::vector<double> g(m);
        for (std::size_t i = 0; i < m; ++i) g[i] = saturation(d.np[i], n_c, alpha);
        double a, b;
        solve_amplitudes(d, g, a, b);
        Eigen::VectorXd r(static_cast<Eigen::Index>(m));
        for (std::size_t i = 0; i < m; ++i) {
            r[static_cast<Eigen::Index>(i)] = d.w[i] * (a + b * g[i] - d.inv[i]);
        }
        return r;
    };

    Eigen::Vector2d lo(std::log(kNcLo), 0.0), hi(std::log(kNcHi), 1.0);
    Eigen::Vector2d x0(std::log(1.0), 0.6);
    Eigen::Vector2d fd(1e-6, 1e-6);
    LsqOptions series_opt;
    series_opt.max_iterations = 2000; // boundary corners (flat series) converge slowly
    const auto starts = multi_start_points(x0, lo, hi, 5);
    const LsqResult shape = fit_multi_start(shape_residuals, starts, lo, hi, fd, series_opt);

    // Full four-parameter polish for joint uncertainties.
    std::vector<double> g(m);
    for (std::size_t i = 0; i < m; ++i) {
        g[i] = saturation(d.np[i], std::exp(shape.x[0]), shape.x[1]);
    }
    double a, b;
    solve_amplitudes(d, g, a, b);

    const auto full_residuals = [&](const Eigen::VectorXd& x) {
        const double qa = std::exp(x[0]), qtls = std::exp(x[1]);
        const double n_c = std::exp(x[2]), alpha = x[3];
        Eigen::VectorXd r(static_cast<Eigen::Index>(m));
        for (std::size_t i = 0; i < m; ++i) {
            const double model = 1.0 / qa + saturation(d.np[i], n_c, alpha) / qtls;
            r[static_cast<Eigen::Index>(i)] = d.w[i] * (model - d.inv[i]);
        }
        return r;
    };
    Eigen::Vector4d lo4(std::log(kQaLo), std::log(kQtlsLo), std::log(kNcLo), 0.0);
    Eigen::Vector4d hi4(std::log(kQaHi), std::log(kQtlsHi), std::log(kNcHi), 1.0);
    Eigen::Vector4d x4(std::log(1.0 / a), std::log(1.0 / b), shape.x[0], shape.x[1]);
    Eigen::Vector4d fd4(1e-6, 1e-6, 1e-6, 1e-6);
    const LsqResult res = levenberg_marquardt(full_residuals, x4, lo4, hi4, fd4, series_opt);

    TlsOnlyFit fit;
    fit.q_a = std::exp(res.x[0]);
    fit.q_tls = std::exp(res.x[1]);
    fit.n_c = std::exp(res.x[2]);
    fit.alpha = res.x[3];
    fit.no_tls_signature = fit.q_tls >= kQtlsHi * 0.99;
    fit.q_a_sigma = fit.q_a * std::sqrt(std::max(0.0, res.covariance(0, 0)));
    fit.q_tls_sigma = fit.q_tls * std::sqrt(std::max(0.0, res.covariance(1, 1)));
    fit.n_c_sigma = fit.n_c * std::sqrt(std::max(0.0, res.covariance(2, 2)));
    fit.alpha_sigma = std::sqrt(std::max(0.0, res.covariance(3, 3)));

    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double model = 1.0 / fit.q_a + saturation(d.np[i], fit.n_c, fit.alpha) / fit.q_tls;
        const double rel = (model - d.inv[i]) / d.inv[i];
        ss += rel * rel;
    }
    fit.residual_rms = std::sqrt(ss / static_cast<double>(m));
    fit.np_min = *std::min_element(d.np.begin(), d.np.end());
    fit.np_max = *std::max_element(d.np.begin(), d.np.end());
    if (!res.converged && !shape.converged) {
        throw FitError("fit_power_series: no start converged (residual rms " +
                       std::to_string(fit.residual_rms) + ")");
    }
    return fit;
}

std::vector<std::pair<double, double>> interpolate_qi(const TlsOnlyFit& fit,
                                                      const std::vector<double>& np_grid) {
    std::vector<std::pair<double, double>> out;
    out.reserve(np_grid.size());
    for (const double np : np_grid) {
        if (!(np > 0.0)) throw DataError("interpolate_qi: photon numbers must be positive");
        if (np < fit.np_min / 10.0 || np > fit.np_max * 10.0) {
            std::ostringstream os;
            os << "interpolate_qi: n_p = " << np << " outside the measured span ["
               << fit.np_min << ", " << fit.np_max << "] extended by one decade";
            throw DataError(os.str());
        }
        const double inv = 1.0 / fit.q_a + saturation(np, fit.n_c, fit.alpha) / fit.q_tls;
        out.emplace_back(np, 1.0 / inv);
    }
    return out;
}

namespace {

// Memoized physics kernels of the joint fit. Keys are exact bit patterns; the
// optimizer revisits identical (T_b, s) pairs constantly while perturbing
// unrelated coordinates.
class QpKernel {
public:
    QpKernel(const MaterialEntry& mat, double omega_r, std::vector<double> temps)
        : gm_(mat.material), rates_(mat.rates), omega_r_(omega_r), temps_(std::move(temps)),
          tqp_cache_(temps_.size()) {}

    double t_qp(std::size_t temp_index, double s_rate) {
        auto& cache = tqp_cache_[temp_index];
        const std::uint64_t key = std::bit_cast<std::uint64_t>(s_rate);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
        DriveParams drive{i_ext_, s_rate, temps_[temp_index]};
        const double nqp = steady_state_nqp(drive, rates_, gm_);
        const double t = effective_temperature(nqp, gm_);
        cache.emplace(key, t);
        return t;
    }

    double sigma_ratio(double t_qp_value) {
        const std::uint64_t key = std::bit_cast<std::uint64_t>(t_qp_value);
        if (auto it = ratio_cache_.find(key); it != ratio_cache_.end()) return it->second;
        const double ratio =
            sigma1(omega_r_, t_qp_value, gm_) / sigma2(omega_r_, t_qp_value, gm_);
        ratio_cache_.emplace(key, ratio);
        return ratio;
    }

    void set_i_ext(double i_ext) { i_ext_ = i_ext; }
    const GapModel& gap_model() const { return gm_; }

private:
    GapModel gm_;
    FilmRates rates_;
    double omega_r_;
    double i_ext_ = 0.0;
    std::vector<double> temps_;
    std::vector<std::unordered_map<std::uint64_t, double>> tqp_cache_;
    std::unordered_map<std::uint64_t, double> ratio_cache_;
};

} // namespace

ModelFit fit_full_model(const std::map<double, PowerSeries>& dataset, const MaterialEntry& mat,
                        double omega_r, const FullFitConfig& cfg) {
    if (!(cfg.i_ext > 0.0)) throw ConfigError("fit_full_model: i_ext must be configured positive");
    if (cfg.np_grid.empty()) throw ConfigError("fit_full_model: np_grid must not be empty");
    if (dataset.size() < 5) {
        throw DataError("fit_full_model: need power series at >= 5 bath temperatures");
    }

    const std::size_t nt = dataset.size();
    const std::size_t ng = cfg.np_grid.size();

    // Stage 1: per-temperature TLS-only fits feed the photon-number grid.
    std::vector<double> temps;
    std::vector<std::vector<double>> target_inv(nt, std::vector<double>(ng));
    {
        std::size_t i = 0;
        for (const auto& [t_bath, series] : dataset) {
            temps.push_back(t_bath);
            const TlsOnlyFit tls = fit_power_series(series);
            const auto qi = interpolate_qi(tls, cfg.np_grid);
            for (std::size_t j = 0; j < ng; ++j) target_inv[i][j] = 1.0 / qi[j].second;
            ++i;
        }
    }

    // Mask and flatten.
    std::vector<GridPoint> grid;
    std::vector<std::pair<std::size_t, std::size_t>> active; // (temp, power) indices
    for (std::size_t i = 0; i < nt; ++i) {
        for (std::size_t j = 0; j < ng; ++j) {
            GridPoint gp;
            gp.t_bath = temps[i];
            gp.n_photon = cfg.np_grid[j];
            gp.q_i = 1.0 / target_inv[i][j];
            gp.masked = cfg.mask_t_below_K > 0.0 && temps[i] < cfg.mask_t_below_K &&
                        cfg.np_grid[j] < cfg.mask_np_below;
            if (!gp.masked) active.emplace_back(i, j);
            grid.push_back(gp);
        }
    }
    if (active.size() < 3 + 2 * ng) {
        throw DataError("fit_full_model: too few unmasked grid points for the parameter count");
    }

    QpKernel kernel(mat, omega_r, temps);
    kernel.set_i_ext(cfg.i_ext);
    const double inv_qa = 1.0 / cfg.q_a;
    const double ls_over_lm = mat.film.ls_over_lm;

    // x = [ln q_tls0, ln n_c, alpha, ln s_0..J-1, ln kappa_0..J-1]
    const int npar = 3 + 2 * static_cast<int>(ng);
    Eigen::VectorXd lower(npar), upper(npar), x0(npar), fd(npar);
    lower[0] = std::log(cfg.q_tls_lo);
    upper[0] = std::log(cfg.q_tls_hi);
    lower[1] = std::log(cfg.n_c_lo);
    upper[1] = std::log(cfg.n_c_hi);
    lower[2] = 0.0;
    upper[2] = 1.0;
    x0[0] = std::log(2e5);
    x0[1] = 0.0;
    x0[2] = 0.7;
    for (std::size_t j = 0; j < ng; ++j) {
        lower[3 + j] = std::log(cfg.s_lo);
        upper[3 + j] = std::log(cfg.s_hi);
        x0[3 + j] = std::log(1e3);
        lower[3 + ng + j] = std::log(cfg.kappa_lo);
        upper[3 + ng + j] = std::log(cfg.kappa_hi);
        x0[3 + ng + j] = 0.0;
    }
    fd.setConstant(1e-6);
    // The steady state responds weakly to s at low drive; take wider
    // difference steps there to stay above the T_qp inversion resolution.
    for (std::size_t j = 0; j < ng; ++j) fd[3 + static_cast<Eigen::Index>(j)] = 1e-4;

    const double hw_over_2k = constants::hbar * omega_r / (2.0 * constants::k_B);

    const auto residuals = [&](const Eigen::VectorXd& x) {
        const double q_tls0 = std::exp(x[0]);
        const double n_c = std::exp(x[1]);
        const double alpha = x[2];
        Eigen::VectorXd r(static_cast<Eigen::Index>(active.size()));
        for (std::size_t k = 0; k < active.size(); ++k) {
            const auto [i, j] = active[k];
            const double s_rate = std::exp(x[3 + static_cast<Eigen::Index>(j)]);
            const double kappa = std::exp(x[3 + static_cast<Eigen::Index>(ng + j)]);
            const double tls =
                std::tanh(hw_over_2k / temps[i]) * saturation(cfg.np_grid[j], n_c, alpha) / q_tls0;
            const double tqp = kernel.t_qp(i, s_rate);
            const double qp = kappa * ls_over_lm * kernel.sigma_ratio(tqp);
            const double model = inv_qa + tls + qp;
            r[static_cast<Eigen::Index>(k)] = (model - target_inv[i][j]) / target_inv[i][j];
        }
        return r;
    };

    // Deterministic multi-start: the configured seed sets the lattice phase.
    std::vector<Eigen::VectorXd> starts = multi_start_points(x0, lower, upper, cfg.multi_starts);
    const double phase = static_cast<double>(cfg.multi_start_seed % 10007ull) / 10007.0;
    for (std::size_t k = 1; k < starts.size(); ++k) {
        for (int j = 0; j < npar; ++j) {
            double frac = (starts[k][j] - lower[j]) / (upper[j] - lower[j]);
            frac = 0.05 + std::fmod(frac - 0.05 + phase, 0.9);
            starts[k][j] = lower[j] + frac * (upper[j] - lower[j]);
        }
    }

    LsqOptions opt;
    opt.max_iterations = 600;
    const LsqResult res = fit_multi_start(residuals, starts, lower, upper, fd, opt);

    const double rms = std::sqrt(2.0 * res.cost / static_cast<double>(active.size()));
    if (rms > cfg.residual_ceiling) {
        std::ostringstream os;
        os << "fit_full_model: residual rms " << rms << " exceeds the ceiling "
           << cfg.residual_ceiling
           << "; the configured i_ext is likely below the model's feasibility threshold - "
              "try a larger i_ext";
        throw FitError(os.str());
    }

    ModelFit fit;
    fit.tls.q_tls0 = std::exp(res.x[0]);
    fit.tls.n_c = std::exp(res.x[1]);
    fit.tls.alpha = res.x[2];
    fit.q_a = cfg.q_a;
    fit.i_ext = cfg.i_ext;
    fit.omega_r = omega_r;
    fit.ls_over_lm = ls_over_lm;
    fit.grid = std::move(grid);
    fit.residual_rms = rms;

    const auto sd = [&](int j) { return std::sqrt(std::max(0.0, res.covariance(j, j))); };
    fit.q_tls0_sigma = fit.tls.q_tls0 * sd(0);
    fit.n_c_sigma = fit.tls.n_c * sd(1);
    fit.alpha_sigma = sd(2);

    for (std::size_t j = 0; j < ng; ++j) {
        PerPowerParams pp;
        pp.n_photon = cfg.np_grid[j];
        pp.s_rate = std::exp(res.x[3 + static_cast<Eigen::Index>(j)]);
        pp.kappa = std::exp(res.x[3 + static_cast<Eigen::Index>(ng + j)]);
        pp.s_sigma = pp.s_rate * sd(3 + static_cast<int>(j));
        pp.kappa_sigma = pp.kappa * sd(3 + static_cast<int>(ng + j));
        // The channel scale is unidentifiable when its uncertainty dwarfs it
        // or the optimizer pinned it against a bound.
        pp.qp_degenerate = pp.kappa_sigma > 5.0 * pp.kappa ||
                           pp.kappa <= cfg.kappa_lo * 1.05 || pp.kappa >= cfg.kappa_hi * 0.95;
        fit.per_power.push_back(pp);
    }

    for (std::size_t i = 0; i < nt; ++i) {
        for (std::size_t j = 0; j < ng; ++j) {
            const double tqp = kernel.t_qp(i, fit.per_power[j].s_rate);
            fit.tqp_surface.push_back({{temps[i], cfg.np_grid[j]}, tqp});
        }
    }

    // R^2 over the unmasked inverse-Q values.
    double mean = 0.0;
    for (const auto& [i, j] : active) mean += target_inv[i][j];
    mean /= static_cast<double>(active.size());
    double ss_tot = 0.0, ss_res = 0.0;
    const Eigen::VectorXd final_r = residuals(res.x);
    for (std::size_t k = 0; k < active.size(); ++k) {
        const auto [i, j] = active[k];
        const double resid_abs = final_r[static_cast<Eigen::Index>(k)] * target_inv[i][j];
        ss_res += resid_abs * resid_abs;
        ss_tot += (target_inv[i][j] - mean) * (target_inv[i][j] - mean);
    }
    fit.goodness = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
    return fit;
}

namespace {

// Log-linear interpolation of the per-power parameters.
std::pair<double, double> params_at_power(const std::vector<PerPowerParams>& pp, double np) {
    if (pp.empty()) throw DataError("decompose_losses: fit has no per-power parameters");
    if (np <= pp.front().n_photon) return {pp.front().s_rate, pp.front().kappa};
    if (np >= pp.back().n_photon) return {pp.back().s_rate, pp.back().kappa};
    for (std::size_t j = 1; j < pp.size(); ++j) {
        if (np <= pp[j].n_photon) {
            const double t = (std::log(np) - std::log(pp[j - 1].n_photon)) /
                             (std::log(pp[j].n_photon) - std::log(pp[j - 1].n_photon));
            return {std::exp((1.0 - t) * std::log(pp[j - 1].s_rate) + t * std::log(pp[j].s_rate)),
                    std::exp((1.0 - t) * std::log(pp[j - 1].kappa) + t * std::log(pp[j].kappa))};
        }
    }
    return {pp.back().s_rate, pp.back().kappa};
}

} // namespace

std::vector<LossRow> decompose_losses(const ModelFit& fit, const MaterialEntry& mat,
                                      const std::vector<double>& t_grid,
                                      const std::vector<double>& np_grid) {
    const GapModel gm(mat.material);
    std::vector<LossRow> rows;
    rows.reserve(t_grid.size() * np_grid.size());
    for (const double tb : t_grid) {
        for (const double np : np_grid) {
            const auto [s_rate, kappa] = params_at_power(fit.per_power, np);
            DriveParams drive{fit.i_ext, s_rate, tb};
            const double tqp = effective_temperature(steady_state_nqp(drive, mat.rates, gm), gm);
            QpLossParams qp{kappa, fit.ls_over_lm, fit.omega_r};
            const LossBudget budget =
                total_inverse_qi(np, tb, tqp, fit.tls, qp, 1.0 / fit.q_a, gm);
            LossRow row;
            row.t_bath = tb;
            row.n_photon = np;
            row.t_qp = tqp;
            row.inv_q_a = budget.inv_q_a;
            row.inv_q_tls = budget.inv_q_tls;
            row.inv_q_qp = budget.inv_q_qp;
            row.inv_q_total = budget.inv_q_total;
            rows.push_back(row);
        }
    }
    return rows;
}

} // namespace qloss
