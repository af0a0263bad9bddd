#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace cooldown {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Small-vector helpers over spans. Paths live in low dimension (d = 1, 2);
// these stay allocation-free so the step loop can run hot.
// ---------------------------------------------------------------------------

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_sq(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) { return std::sqrt(norm_sq(a)); }

inline bool all_finite(std::span<const double> a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Grids and quasi-random sampling
// ---------------------------------------------------------------------------

/// n points geometrically spaced on [lo, hi], endpoints included.
inline std::vector<double> log_spaced(double lo, double hi, int n) {
    if (!(lo > 0.0) || !(hi > lo) || n < 2) throw std::invalid_argument("log_spaced: need 0 < lo < hi, n >= 2");
    std::vector<double> out(static_cast<std::size_t>(n));
    const double la = std::log(lo), lb = std::log(hi);
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::exp(la + (lb - la) * i / (n - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

/// Kronecker (additive recurrence) low-discrepancy sequence on [0,1)^d.
/// Deterministic; used by the finite-difference sweeps.
class QuasiRandom {
public:
    explicit QuasiRandom(int dim) : state_(static_cast<std::size_t>(dim), 0.5), alpha_(static_cast<std::size_t>(dim)) {
        // generalized golden ratios (Roberts' R_d sequence)
        double g = 2.0;
        for (int it = 0; it < 64; ++it) g = std::pow(1.0 + g, 1.0 / (dim + 1));
        double a = 1.0 / g;
        for (std::size_t k = 0; k < alpha_.size(); ++k) {
            alpha_[k] = a;
            a /= g;
        }
    }

    std::span<const double> next() {
        for (std::size_t k = 0; k < state_.size(); ++k) {
            state_[k] += alpha_[k];
            if (state_[k] >= 1.0) state_[k] -= 1.0;
        }
        return state_;
    }

private:
    std::vector<double> state_;
    std::vector<double> alpha_;
};

// ---------------------------------------------------------------------------
// Adaptive Simpson quadrature
// ---------------------------------------------------------------------------

struct QuadratureResult {
    double value = 0.0;
    bool converged = true;
};

namespace detail {

inline double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
void adapt(const F& f, double a, double m, double b, double fa, double fm, double fb, double whole, double tol,
           int depth, QuadratureResult& out) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol || depth <= 0) {
        if (depth <= 0 && std::abs(delta) > 15.0 * tol) out.converged = false;
        out.value += left + right + delta / 15.0;
        return;
    }
    adapt(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1, out);
    adapt(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1, out);
}

} // namespace detail

/// Integrate f over [a, b] to |error| <~ max(abs_tol, rel_tol * |integral|).
/// A 64-panel composite scan fixes the tolerance scale and seeds one adaptive
/// recursion per panel, so a peaked integrand cannot hide from the refinement.
template <typename F>
QuadratureResult integrate(const F& f, double a, double b, double rel_tol = 1e-10, double abs_tol = 1e-300,
                           int max_depth = 56) {
    if (a == b) return {0.0, true};
    constexpr int kScanPanels = 64;
    const double h = (b - a) / kScanPanels;
    double fx[2 * kScanPanels + 1];
    for (int i = 0; i <= 2 * kScanPanels; ++i) fx[i] = f(a + 0.5 * h * i);
    double scan = 0.0;
    for (int i = 0; i < kScanPanels; ++i) scan += h / 6.0 * (fx[2 * i] + 4.0 * fx[2 * i + 1] + fx[2 * i + 2]);
    double tol = std::max(abs_tol, rel_tol * std::abs(scan));
    if (tol <= 0.0) tol = 1e-300;
    QuadratureResult out;
    for (int i = 0; i < kScanPanels; ++i) {
        const double x0 = a + i * h, x1 = x0 + 0.5 * h, x2 = (i + 1 == kScanPanels) ? b : x0 + h;
        const double whole = h / 6.0 * (fx[2 * i] + 4.0 * fx[2 * i + 1] + fx[2 * i + 2]);
        detail::adapt(f, x0, x1, x2, fx[2 * i], fx[2 * i + 1], fx[2 * i + 2], whole, tol / kScanPanels, max_depth,
                      out);
    }
    return out;
}

/// Integrate f over [a, inf) via the substitution u = a + s/(1-s).
template <typename F>
QuadratureResult integrate_to_infinity(const F& f, double a, double rel_tol = 1e-10) {
    auto g = [&](double s) {
        if (s >= 1.0) return 0.0;
        const double om = 1.0 - s;
        const double u = a + s / om;
        return f(u) / (om * om);
    };
    return integrate(g, 0.0, 1.0, rel_tol);
}

// ---------------------------------------------------------------------------
// Inverse normal CDF (Wichura, algorithm AS 241, PPND16).
// Drives all Gaussian draws so streams reproduce bit-for-bit everywhere.
// ---------------------------------------------------------------------------

inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inverse_normal_cdf: p must be in (0,1)");
    static constexpr double a[8] = {3.3871328727963666080e0,  1.3314166789178437745e2, 1.9715909503065514427e3,
                                    1.3731693765509461125e4,  4.5921953931549871457e4, 6.7265770927008700853e4,
                                    3.3430575583588128105e4,  2.5090809287301226727e3};
    static constexpr double b[8] = {1.0,                      4.2313330701600911252e1, 6.8718700749205790830e2,
                                    5.3941960214247511077e3,  2.1213794301586595867e4, 3.9307895800092710610e4,
                                    2.8729085735721942674e4,  5.2264952788528545610e3};
    static constexpr double c[8] = {1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
                                    3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
                                    2.27238449892691845833e-2, 7.74545014278341407640e-4};
    static constexpr double d[8] = {1.0,                      2.05319162663775882187e0, 1.67638483018380384940e0,
                                    6.89767334985100004550e-1, 1.48103976427480074590e-1, 1.51986665636164571966e-2,
                                    5.47593808499534494600e-4, 1.05075007164441684324e-9};
    static constexpr double e[8] = {6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
                                    2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
                                    2.71155556874348757815e-5, 2.01033439929228813265e-7};
    static constexpr double fc[8] = {1.0,                     5.99832206555887937690e-1, 1.36929880922735805310e-1,
                                     1.48753612908506148525e-2, 7.86869131145613259100e-4, 1.84631831751005468180e-5,
                                     1.42151175831644588870e-7, 2.04426310338993978564e-15};
    auto poly = [](const double (&k)[8], double x) {
        double s = k[7];
        for (int i = 6; i >= 0; --i) s = s * x + k[i];
        return s;
    };
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * poly(a, r) / poly(b, r);
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = poly(c, r) / poly(d, r);
    } else {
        r -= 5.0;
        val = poly(e, r) / poly(fc, r);
    }
    return (q < 0.0) ? -val : val;
}

// ---------------------------------------------------------------------------
// Ordinary least squares for y = slope * x + intercept
// ---------------------------------------------------------------------------

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    std::size_t n = 0;
};

inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("linear_fit: need matching arrays, n >= 2");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0) throw std::invalid_argument("linear_fit: degenerate abscissa");
    LinearFit fit;
    fit.n = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        rss += r * r;
    }
    fit.slope_stderr = (n > 2) ? std::sqrt(rss / static_cast<double>(n - 2) / sxx) : 0.0;
    return fit;
}

} // namespace cooldown
