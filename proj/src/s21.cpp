#include "qloss/s21.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "qloss/constants.hpp"
#include "qloss/errors.hpp"
#include "qloss/lsq.hpp"

namespace qloss {

namespace {

constexpr double kPi = 3.14159265358979323846;

double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    if (a > kPi) a -= 2.0 * kPi;
    return a;
}

std::vector<double> unwrap(std::vector<double> phase) {
    for (std::size_t i = 1; i < phase.size(); ++i) {
        double d = phase[i] - phase[i - 1];
        while (d > kPi) {
            phase[i] -= 2.0 * kPi;
            d = phase[i] - phase[i - 1];
        }
        while (d < -kPi) {
            phase[i] += 2.0 * kPi;
            d = phase[i] - phase[i - 1];
        }
    }
    return phase;
}

double median(std::vector<double> v) {
    if (v.empty()) throw DataError("median of empty set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

void S21Params::validate() const {
    if (!(f0 > 0.0)) throw std::invalid_argument("S21Params: f0 must be positive");
    if (!(q_i > 0.0)) throw std::invalid_argument("S21Params: q_i must be positive");
    if (!(q_c > 0.0)) throw std::invalid_argument("S21Params: q_c must be positive");
    if (!(amp > 0.0)) throw std::invalid_argument("S21Params: amp must be positive");
}

void Spectrum::validate() const {
    if (freqs.size() != s21.size()) throw DataError("Spectrum: length mismatch");
    if (freqs.size() < 32) throw DataError("Spectrum: need at least 32 points");
    for (std::size_t i = 1; i < freqs.size(); ++i) {
        if (!(freqs[i] > freqs[i - 1])) throw DataError("Spectrum: frequencies must increase");
    }
}

std::complex<double> model_s21_inv(double f, const S21Params& p) {
    const std::complex<double> i(0.0, 1.0);
    const std::complex<double> resonator =
        (p.q_i / p.q_c) * std::exp(i * p.phi) / (1.0 + 2.0 * i * p.q_i * (f - p.f0) / p.f0);
    return (1.0 / p.amp) * std::exp(-i * (p.global_phase + p.path_phase_rate * f)) *
           (1.0 + resonator);
}

Spectrum synth_spectrum(const S21Params& p, std::vector<double> f_grid, double noise_sigma,
                        std::uint64_t seed) {
    p.validate();
    if (noise_sigma < 0.0) throw std::invalid_argument("synth_spectrum: noise_sigma must be >= 0");

    std::mt19937_64 rng(seed);
    const auto uniform01 = [&rng]() {
        return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    };
    // Box-Muller; std::normal_distribution is implementation-defined.
    const auto normal_pair = [&](double& a, double& b) {
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        a = radius * std::cos(2.0 * kPi * u2);
        b = radius * std::sin(2.0 * kPi * u2);
    };

    Spectrum sp;
    sp.freqs = std::move(f_grid);
    sp.s21.reserve(sp.freqs.size());
    for (const double f : sp.freqs) {
        std::complex<double> v = 1.0 / model_s21_inv(f, p);
        if (noise_sigma > 0.0) {
            double g1, g2;
            normal_pair(g1, g2);
            v += std::complex<double>(noise_sigma * g1, noise_sigma * g2);
        }
        sp.s21.push_back(v);
    }
    return sp;
}

double photon_number(double p_in_watts, double f_r, double q_i, double q_c) {
    if (p_in_watts < 0.0) throw std::invalid_argument("photon_number: power must be >= 0");
    if (!(f_r > 0.0) || !(q_i > 0.0) || !(q_c > 0.0)) {
        throw std::invalid_argument("photon_number: f_r, q_i, q_c must be positive");
    }
    const double omega = 2.0 * kPi * f_r;
    return 2.0 / (constants::hbar_J * omega * omega) * (q_i * q_i / q_c) * p_in_watts;
}

namespace {

struct WingEstimate {
    double amp = 1.0;
    double theta = 0.0;
    double path_rate = 0.0;
    double noise = 0.0; // robust |S21| noise estimate
};

// Amplitude and linear phase from the off-resonance wings.
WingEstimate estimate_wings(const Spectrum& sp) {
    const std::size_t n = sp.freqs.size();
    const std::size_t nw = std::max<std::size_t>(4, n / 8);

    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < nw; ++i) idx.push_back(i);
    for (std::size_t i = n - nw; i < n; ++i) idx.push_back(i);

    std::vector<double> mags;
    for (std::size_t i : idx) mags.push_back(std::abs(sp.s21[i]));
    WingEstimate est;
    est.amp = median(mags);

    std::vector<double> dev;
    for (double m : mags) dev.push_back(std::abs(m - est.amp));
    est.noise = 1.4826 * median(dev);

    std::vector<double> phase(n);
    for (std::size_t i = 0; i < n; ++i) phase[i] = std::arg(sp.s21[i]);
    phase = unwrap(std::move(phase));

    // Least-squares line through the wing phases, frequency centered for
    // conditioning.
    const double fmid = 0.5 * (sp.freqs.front() + sp.freqs.back());
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i : idx) {
        const double x = sp.freqs[i] - fmid;
        sw += 1.0;
        sx += x;
        sy += phase[i];
        sxx += x * x;
        sxy += x * phase[i];
    }
    const double det = sw * sxx - sx * sx;
    if (std::abs(det) < 1e-30) throw DataError("extract: wing phase fit degenerate");
    est.path_rate = (sw * sxy - sx * sy) / det;
    const double intercept = (sxx * sy - sx * sxy) / det; // at f = fmid
    est.theta = wrap_angle(intercept - est.path_rate * fmid);
    return est;
}

struct Circle {
    double cx = 0.0, cy = 0.0, radius = 0.0;
};

// Algebraic (Kasa) least-squares circle through the inverse-plane locus.
Circle fit_circle(const std::vector<std::complex<double>>& z) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    for (const auto& w : z) {
        const double x = w.real(), y = w.imag();
        const Eigen::Vector3d row(2.0 * x, 2.0 * y, 1.0);
        m += row * row.transpose();
        b += row * (x * x + y * y);
    }
    const Eigen::Vector3d sol = m.fullPivLu().solve(b);
    if (!m.fullPivLu().isInvertible()) throw DataError("extract: circle fit degenerate");
    Circle c;
    c.cx = sol[0];
    c.cy = sol[1];
    const double r2 = sol[2] + c.cx * c.cx + c.cy * c.cy;
    if (!(r2 > 0.0)) throw DataError("extract: circle fit degenerate");
    c.radius = std::sqrt(r2);
    return c;
}

struct PhaseFit {
    double f0 = 0.0;
    double q_i = 0.0;
};

// Fits psi(f) = psi0 - 2 atan(2 q_i (f - f0)/f0) to the angle of the
// inverse-plane locus about the circle center.
PhaseFit fit_phase(const std::vector<double>& freqs, const std::vector<std::complex<double>>& z,
                   const Circle& c, double f0_init, double q_init) {
    std::vector<double> psi(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        psi[i] = std::arg(z[i] - std::complex<double>(c.cx, c.cy));
    }
    psi = unwrap(std::move(psi));

    const auto residuals = [&](const Eigen::VectorXd& x) {
        const double f0 = x[0];
        const double q = std::exp(x[1]);
        const double psi0 = x[2];
        Eigen::VectorXd r(static_cast<Eigen::Index>(psi.size()));
        for (std::size_t i = 0; i < psi.size(); ++i) {
            r[static_cast<Eigen::Index>(i)] =
                psi[i] - (psi0 - 2.0 * std::atan(2.0 * q * (freqs[i] - f0) / f0));
        }
        return r;
    };

    Eigen::Vector3d lower(freqs.front(), std::log(10.0), -1e4);
    Eigen::Vector3d upper(freqs.back(), std::log(1e9), 1e4);
    Eigen::Vector3d fd(f0_init / q_init * 1e-5, 1e-7, 1e-7);

    LsqResult best;
    bool have = false;
    for (const double qm : {1.0, 3.0, 10.0}) {
        Eigen::Vector3d x0(f0_init, std::log(q_init * qm), psi[psi.size() / 2]);
        try {
            LsqResult res = levenberg_marquardt(residuals, x0, lower, upper, fd, {});
            if (!have || res.cost < best.cost) {
                best = res;
                have = true;
            }
        } catch (const FitError&) {
        }
    }
    if (!have) throw DataError("extract: phase fit failed");
    return {best.x[0], std::exp(best.x[1])};
}

ExtractionResult refine(const Spectrum& sp, const S21Params& init, double resid_scale,
                        bool fix_qc) {
    const std::size_t n = sp.freqs.size();
    std::vector<std::complex<double>> inv(n);
    for (std::size_t i = 0; i < n; ++i) inv[i] = 1.0 / sp.s21[i];

    // x = [f0, ln q_i, (ln q_c), phi, ln amp, theta, path_rate]
    const int np = fix_qc ? 6 : 7;
    const auto pack = [&](const S21Params& p) {
        Eigen::VectorXd x(np);
        int k = 0;
        x[k++] = p.f0;
        x[k++] = std::log(p.q_i);
        if (!fix_qc) x[k++] = std::log(p.q_c);
        x[k++] = p.phi;
        x[k++] = std::log(p.amp);
        x[k++] = p.global_phase;
        x[k++] = p.path_phase_rate;
        return x;
    };
    const auto unpack = [&](const Eigen::VectorXd& x) {
        S21Params p;
        int k = 0;
        p.f0 = x[k++];
        p.q_i = std::exp(x[k++]);
        p.q_c = fix_qc ? init.q_c : std::exp(x[k++]);
        p.phi = x[k++];
        p.amp = std::exp(x[k++]);
        p.global_phase = x[k++];
        p.path_phase_rate = x[k++];
        return p;
    };

    const auto residuals = [&](const Eigen::VectorXd& x) {
        const S21Params p = unpack(x);
        Eigen::VectorXd r(2 * static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const std::complex<double> d = (model_s21_inv(sp.freqs[i], p) - inv[i]) / resid_scale;
            r[2 * static_cast<Eigen::Index>(i)] = d.real();
            r[2 * static_cast<Eigen::Index>(i) + 1] = d.imag();
        }
        return r;
    };

    const double span = sp.freqs.back() - sp.freqs.front();
    Eigen::VectorXd fd(np), lower(np), upper(np);
    lower.setConstant(-std::numeric_limits<double>::infinity());
    upper.setConstant(std::numeric_limits<double>::infinity());
    {
        int k = 0;
        fd[k++] = std::max(1e-3, init.f0 / init.q_i * 1e-5); // f0
        fd[k++] = 1e-7;                                      // ln q_i
        if (!fix_qc) fd[k++] = 1e-7;                         // ln q_c
        fd[k++] = 1e-7;                                      // phi
        fd[k++] = 1e-7;                                      // ln amp
        fd[k++] = 1e-7;                                      // theta
        fd[k++] = 1e-7 / span;                               // path rate
    }

    LsqOptions opt;
    opt.max_iterations = 200;
    const LsqResult res = levenberg_marquardt(residuals, pack(init), lower, upper, fd, opt);

    ExtractionResult out;
    out.params = unpack(res.x);
    out.params.phi = wrap_angle(out.params.phi);
    out.params.global_phase = wrap_angle(out.params.global_phase);
    out.residual_rms =
        std::sqrt(2.0 * res.cost / static_cast<double>(n)) * resid_scale;

    // Standard errors; log-parameter sigmas scale by the value.
    const auto sd = [&](int j) { return std::sqrt(std::max(0.0, res.covariance(j, j))); };
    int k = 0;
    out.uncertainties.f0 = sd(k++);
    out.uncertainties.q_i = out.params.q_i * sd(k++);
    out.uncertainties.q_c = fix_qc ? 0.0 : out.params.q_c * sd(k);
    if (!fix_qc) ++k;
    out.uncertainties.phi = sd(k++);
    out.uncertainties.amp = out.params.amp * sd(k++);
    out.uncertainties.global_phase = sd(k++);
    out.uncertainties.path_phase_rate = sd(k++);
    return out;
}

S21Params initial_estimate(const Spectrum& sp) {
    sp.validate();
    const std::size_t n = sp.freqs.size();

    std::size_t i_min = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (std::abs(sp.s21[i]) < std::abs(sp.s21[i_min])) i_min = i;
    }
    const WingEstimate wings = estimate_wings(sp);
    const double dip = wings.amp - std::abs(sp.s21[i_min]);
    if (i_min < 2 || i_min > n - 3 || dip < std::max(4.0 * wings.noise, 1e-3 * wings.amp)) {
        throw DataError("extract: no resonance found");
    }

    // Normalize and invert; off resonance the locus sits at 1 + 0i.
    std::vector<std::complex<double>> z(n);
    const std::complex<double> i1(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::complex<double> norm =
            wings.amp * std::exp(i1 * (wings.theta + wings.path_rate * sp.freqs[i]));
        z[i] = norm / sp.s21[i];
    }

    const Circle circle = fit_circle(z);

    // Half-depth width of the measured dip bounds the total Q from below.
    const double half = 0.5 * (wings.amp + std::abs(sp.s21[i_min]));
    std::size_t lo = i_min, hi = i_min;
    while (lo > 0 && std::abs(sp.s21[lo]) < half) --lo;
    while (hi + 1 < n && std::abs(sp.s21[hi]) < half) ++hi;
    const double width = std::max(sp.freqs[hi] - sp.freqs[lo],
                                  (sp.freqs.back() - sp.freqs.front()) / static_cast<double>(n));
    const double q_total_est = sp.freqs[i_min] / width;

    const PhaseFit pf = fit_phase(sp.freqs, z, circle, sp.freqs[i_min], q_total_est);

    S21Params p;
    p.f0 = pf.f0;
    p.q_i = pf.q_i;
    p.q_c = pf.q_i / (2.0 * circle.radius);
    p.phi = std::atan2(circle.cy, circle.cx - 1.0);
    p.amp = wings.amp;
    p.global_phase = wings.theta;
    p.path_phase_rate = wings.path_rate;
    return p;
}

} // namespace

ExtractionResult extract_resonator_params(const Spectrum& sp) {
    const S21Params init = initial_estimate(sp);
    ExtractionResult out = refine(sp, init, 1.0, false);
    out.n_photon = photon_number(dbm_to_watts(sp.p_in_dbm), out.params.f0, out.params.q_i,
                                 out.params.q_c);
    return out;
}

ExtractionResult extract_resonator_params_fixed_qc(const Spectrum& sp, double qc0) {
    if (!(qc0 > 0.0)) throw std::invalid_argument("extract: qc0 must be positive");
    S21Params init = initial_estimate(sp);
    init.q_c = qc0;
    ExtractionResult out = refine(sp, init, 1.0, true);
    out.n_photon = photon_number(dbm_to_watts(sp.p_in_dbm), out.params.f0, out.params.q_i,
                                 out.params.q_c);
    return out;
}

QcPooling pool_qc(const std::vector<ExtractionRecord>& records, double tc) {
    if (!(tc > 0.0)) throw std::invalid_argument("pool_qc: tc must be positive");
    QcPooling pooling;
    std::vector<double> qcs;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (rec.result.n_photon > 1e3 && rec.t_bath < 0.1 * tc) {
            pooling.window.push_back(i);
            qcs.push_back(rec.result.params.q_c);
        }
    }
    if (qcs.empty()) {
        throw DataError("pool_qc: no spectra with n_p > 1e3 and T_b < 0.1 Tc");
    }
    pooling.qc0 = median(qcs);
    return pooling;
}

} // namespace qloss
