#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "cooldown/estimates.hpp"
#include "cooldown/math.hpp"
#include "cooldown/potentials.hpp"
#include "cooldown/rng.hpp"
#include "cooldown/sde_engine.hpp"

namespace cooldown {

// ---------------------------------------------------------------------------
// phi(kappa) = 1/kappa^2 + sum_{n>=0} 2^{n+1} / (2^n + kappa)^2
// ---------------------------------------------------------------------------
// Bounds the probability that a continuous local martingale ever exceeds its
// quadratic variation by kappa. Terms fall below 2^{1-n}, so the tail after
// truncating at n is at most 2^{2-n}.

struct SeriesBound {
    double kappa = 0.0;
    double value = 0.0;
    int truncation_index = 0;
    double tail_bound = 0.0;
};

inline SeriesBound phi_kappa(double kappa) {
    if (!(kappa > 0.0)) throw std::invalid_argument("phi_kappa: kappa must be > 0");
    SeriesBound out;
    out.kappa = kappa;
    double sum = 1.0 / (kappa * kappa);
    int n = 0;
    for (;; ++n) {
        const double p2 = std::pow(2.0, n);
        sum += 2.0 * p2 / ((p2 + kappa) * (p2 + kappa));
        const double tail = std::pow(2.0, 2 - (n + 1));
        if (tail <= std::max(1e-12, 1e-10 * sum)) {
            out.tail_bound = tail;
            break;
        }
        if (n > 200) throw std::runtime_error("phi_kappa: series failed to truncate");
    }
    out.truncation_index = n + 1;
    out.value = sum;
    return out;
}

/// P(sup_t (W_t - t) >= kappa) = e^{-2 kappa} for standard Brownian motion.
/// W - <W> is exactly the object phi bounds, so e^{-2 kappa} <= phi(kappa).
inline double bm_drift_overshoot_tail(double kappa) {
    if (!(kappa > 0.0)) throw std::invalid_argument("bm_drift_overshoot_tail: kappa must be > 0");
    return std::exp(-2.0 * kappa);
}

struct McEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    std::uint64_t n = 0;
};

/// Monte Carlo estimate of P(sup_t (W_t - t) >= kappa) on a finite horizon.
/// Between grid points the drifted path is a Brownian bridge, so crossings are
/// resolved exactly via the bridge maximum law; the grid itself adds no bias.
inline McEstimate bm_overshoot_mc(double kappa, std::uint64_t n_paths, double horizon = 50.0, double dt = 0.05,
                                  std::uint64_t seed = 1) {
    std::uint64_t hits = 0;
    const auto steps = static_cast<std::uint64_t>(horizon / dt);
    for (std::uint64_t p = 0; p < n_paths; ++p) {
        NormalStream rng(seed, p);
        double y = 0.0;
        const double sq = std::sqrt(dt);
        for (std::uint64_t k = 0; k < steps; ++k) {
            const double yn = y + sq * rng.normal() - dt;
            if (y >= kappa || yn >= kappa) {
                ++hits;
                break;
            }
            const double ab = (kappa - y) * (kappa - yn);
            if (ab < 1.1 * dt * 21.0) { // else the bridge crossing chance is < 1e-18
                if (rng.uniform() < std::exp(-2.0 * ab / dt)) {
                    ++hits;
                    break;
                }
            }
            y = yn;
            if (kappa - y > 25.0) break; // remaining crossing chance < 2e-22
        }
    }
    McEstimate est;
    est.n = n_paths;
    est.value = static_cast<double>(hits) / static_cast<double>(n_paths);
    est.stderr_ = std::sqrt(est.value * (1.0 - est.value) / static_cast<double>(n_paths));
    return est;
}

// ---------------------------------------------------------------------------
// Half-normal mean
// ---------------------------------------------------------------------------

/// E|N(0,1)| = sqrt(2/pi).
inline double half_normal_constant() { return std::sqrt(2.0 / std::numbers::pi); }

/// The same constant by quadrature of |x| e^{-x^2/2} / sqrt(2 pi).
inline double half_normal_quadrature(double rel_tol = 1e-11) {
    auto res = integrate(
        [](double x) { return x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }, 0.0, 42.0, rel_tol);
    if (!res.converged) throw std::runtime_error("half_normal_quadrature failed");
    return 2.0 * res.value;
}

// ---------------------------------------------------------------------------
// Growth of int_t^u |Z_s| ds for the cooled OU process
// ---------------------------------------------------------------------------
// With z0 = 0, E int_t^u |Z_s| ds grows like (kappa/2) log u with
// kappa = sqrt(2/pi); the winding of the counterexample inherits exactly this
// growth. The sample variance of the full integral stays below 1.

struct WindingGrowth {
    std::vector<double> u;
    std::vector<double> mean_integral;
    double slope = 0.0;       // of mean vs log u
    double target = 0.0;      // kappa / 2
    double integral_variance = 0.0;
    std::uint64_t ensemble = 0;
};

inline WindingGrowth winding_integral_growth(double t, double horizon, std::uint64_t ensemble, std::uint64_t seed = 1,
                                             double dt = 0.05) {
    if (!(horizon > t) || t < 0.0) throw std::invalid_argument("winding_integral_growth: need horizon > t >= 0");
    WindingGrowth out;
    out.ensemble = ensemble;
    out.target = 0.5 * half_normal_constant();
    const double fit_lo = std::max(10.0, t + 1.0);
    out.u = log_spaced(fit_lo, horizon, 24);

    // shared time grid and per-step increment parameters
    const auto n_steps = static_cast<std::size_t>(std::llround((horizon - t) / dt));
    std::vector<double> times(n_steps);
    for (std::size_t i = 0; i < n_steps; ++i)
        times[i] = (i + 1 == n_steps) ? horizon : t + (horizon - t) * static_cast<double>(i + 1) / n_steps;
    std::vector<double> decay(times.size()), sd(times.size());
    double prev = t;
    for (std::size_t k = 0; k < times.size(); ++k) {
        decay[k] = std::exp(-2.0 * (times[k] - prev));
        sd[k] = std::sqrt(radial_increment_variance(prev, times[k], 1e-9));
        prev = times[k];
    }

    std::vector<double> mean_at(out.u.size(), 0.0);
    double var_sum = 0.0, var_sum_sq = 0.0;
    for (std::uint64_t p = 0; p < ensemble; ++p) {
        NormalStream rng(seed, p);
        double z = 0.0, integral = 0.0;
        double prev_t = t, prev_abs = 0.0;
        std::size_t gi = 0;
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double zn = decay[k] * z + sd[k] * rng.normal();
            integral += 0.5 * (prev_abs + std::abs(zn)) * (times[k] - prev_t);
            prev_t = times[k];
            prev_abs = std::abs(zn);
            z = zn;
            while (gi < out.u.size() && times[k] >= out.u[gi] - 1e-9) {
                mean_at[gi] += integral;
                ++gi;
            }
        }
        while (gi < out.u.size()) {
            mean_at[gi] += integral;
            ++gi;
        }
        var_sum += integral;
        var_sum_sq += integral * integral;
    }
    for (double& m : mean_at) m /= static_cast<double>(ensemble);
    out.mean_integral = mean_at;
    const double n = static_cast<double>(ensemble);
    out.integral_variance = (var_sum_sq - var_sum * var_sum / n) / (n - 1.0);

    std::vector<double> logs(out.u.size());
    for (std::size_t i = 0; i < logs.size(); ++i) logs[i] = std::log(out.u[i]);
    out.slope = linear_fit(logs, out.mean_integral).slope;
    return out;
}

// ---------------------------------------------------------------------------
// Deterministic decay rate of the noise-free flow
// ---------------------------------------------------------------------------

struct DeterministicRate {
    RateEstimate estimate;
    MomentCurve curve; // F(x_t) - level at log-spaced checkpoints, survival = 1
};

/// Integrates dx/dt = -f(x) with RK4 on the growing step grid and fits the
/// decay exponent of F(x_t) - level over the final two decades.
inline DeterministicRate deterministic_rate(const Potential& pot, const CriticalLevel& level,
                                            std::span<const double> x0, double horizon) {
    const std::size_t d = static_cast<std::size_t>(pot.dimension);
    if (x0.size() != d) throw std::invalid_argument("deterministic_rate: x0 dimension mismatch");
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> k1(d), k2(d), k3(d), k4(d), tmp(d);
    auto rhs = [&](const std::vector<double>& y, std::vector<double>& out) {
        pot.gradient(y, out);
        for (auto& v : out) v = -v;
    };

    const std::vector<double> cps = log_spaced(1.0, horizon, 64);
    DeterministicRate out;
    const double gap0 = pot.value(x) - level.level;

    double t = 0.0;
    std::size_t ci = 0;
    while (t < horizon) {
        double dt = std::min(1e-3 + 1e-4 * t, 0.1);
        if (ci < cps.size() && t + dt >= cps[ci]) dt = cps[ci] - t;
        rhs(x, k1);
        for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
        rhs(tmp, k2);
        for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
        rhs(tmp, k3);
        for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + dt * k3[i];
        rhs(tmp, k4);
        for (std::size_t i = 0; i < d; ++i) x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        t += dt;
        if (ci < cps.size() && t >= cps[ci] - 1e-12) {
            out.curve.t.push_back(cps[ci]);
            out.curve.mean.push_back(pot.value(x) - level.level);
            out.curve.stderr_.push_back(0.0);
            out.curve.survival.push_back(1.0);
            out.curve.n_alive.push_back(1);
            ++ci;
        }
    }

    if (out.curve.mean.back() >= gap0)
        throw std::domain_error("deterministic_rate: value did not decay (wrong basin?)");
    out.estimate = fit_rate(out.curve, horizon / 100.0, horizon);
    return out;
}

} // namespace cooldown
