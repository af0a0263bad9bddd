#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cooldown/math.hpp"
#include "cooldown/potentials.hpp"
#include "cooldown/rng.hpp"
#include "cooldown/schedules.hpp"
#include "cooldown/stopping_rule.hpp"

namespace cooldown {

// ---------------------------------------------------------------------------
// Drift and diffusivity
// ---------------------------------------------------------------------------

enum class DriftMode { Zero, GradientFlow, RingCounterexample };

inline DriftMode parse_drift_mode(const std::string& s) {
    if (s == "zero") return DriftMode::Zero;
    if (s == "gradient_flow") return DriftMode::GradientFlow;
    if (s == "ring" || s == "ring_counterexample") return DriftMode::RingCounterexample;
    throw std::invalid_argument("unknown drift mode: '" + s + "'");
}

inline const char* drift_mode_name(DriftMode m) {
    switch (m) {
        case DriftMode::Zero: return "zero";
        case DriftMode::GradientFlow: return "gradient_flow";
        case DriftMode::RingCounterexample: return "ring_counterexample";
    }
    return "?";
}

struct DriftSpec {
    DriftMode mode = DriftMode::GradientFlow;
    const Potential* potential = nullptr;

    /// alpha(x) given the precomputed gradient f(x).
    void eval(std::span<const double> x, std::span<const double> grad, std::span<double> alpha) const {
        switch (mode) {
            case DriftMode::Zero:
                for (auto& a : alpha) a = 0.0;
                return;
            case DriftMode::GradientFlow:
                for (std::size_t i = 0; i < grad.size(); ++i) alpha[i] = -grad[i];
                return;
            case DriftMode::RingCounterexample: {
                const double wob = std::abs(norm(x) - 1.0);
                alpha[0] = -grad[0] - x[1] * wob;
                alpha[1] = -grad[1] + x[0] * wob;
                return;
            }
        }
    }
};

enum class SpatialFactor { Identity, Mollifier };

/// beta_t = sigma_t * phi(X_t) * I_d. The scalar magnitude below equals both
/// the spectral norm |beta_t| and |beta_t|_F / sqrt(d).
struct DiffusivitySpec {
    Schedule schedule;
    SpatialFactor spatial = SpatialFactor::Identity;

    double magnitude(double t, std::span<const double> x) const {
        const double s = schedule.eval(t);
        if (spatial == SpatialFactor::Identity) return s;
        return s * mollifier_radial(norm(x));
    }
};

// ---------------------------------------------------------------------------
// Simulation configuration
// ---------------------------------------------------------------------------

/// Post-undershoot rise probe for the dropout experiment: for each activation
/// time t1, the first time T' >= t1 with F(X) < ell - (t+1)^{-1/(2 theta - 1)}
/// is recorded, and the path is flagged if F later rises by the threshold
/// 2 kappa_{T'} = (T'+1)^{-1/(2 theta - 1)}.
struct BarrierProbeConfig {
    bool enabled = false;
    double ell = 0.0;
    double theta = 0.75;
    std::vector<double> t1_values;
};

struct SimConfig {
    std::vector<double> x0;
    double t_max = 1e4;
    double dt0 = 1e-3;
    double dt_growth = 1e-4;
    double dt_cap = 0.1;
    double eta_stab = 0.1;
    double hessian_bound = 1.0; // bound on |Hess F| over the working region
    std::uint64_t master_seed = 1;
    std::uint64_t path_index = 0;
    int checkpoint_count = 64;
    double tail_start = -1.0; // window start for tail statistics; < 0 means t_max / 2
    std::vector<double> extra_checkpoints;
    BarrierProbeConfig barrier_probe;

    double step_size(double t) const {
        return std::min({dt0 + dt_growth * t, dt_cap, eta_stab / hessian_bound});
    }

    std::vector<double> checkpoint_times() const {
        std::vector<double> times;
        if (t_max > 1.0 && checkpoint_count >= 2) {
            times = log_spaced(1.0, t_max, checkpoint_count);
        } else {
            times.push_back(t_max);
        }
        for (double t : extra_checkpoints)
            if (t > 0.0 && t <= t_max) times.push_back(t);
        std::sort(times.begin(), times.end());
        times.erase(std::unique(times.begin(), times.end(),
                                [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                    times.end());
        return times;
    }
};

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

struct Checkpoint {
    double t = 0.0;
    std::vector<double> x;
    double F = 0.0;
    double grad_norm = 0.0;
    double I_val = 0.0;
    double I_noise = 0.0;
    double I_trace = 0.0;
    double I_wind = 0.0;
    double phi = 0.0;
    bool alive = true;
};

struct TailStats {
    double alignment_min = kInf; // min of <f,-alpha>/|f|^2, 0/0 -> +inf
    double ratio_fa_min = kInf;  // min of |f|/|alpha|, 0/0 -> +inf
    double beta_max = 0.0;
    double alpha_max = 0.0;
    double F_min = kInf;
    double radius_max = 0.0;
};

struct BarrierObservation {
    double t1 = 0.0;
    bool undershot = false;  // some T' >= t1 with F < ell - barrier(T')
    double undershoot_time = 0.0;
    double undershoot_value = 0.0; // F(X_{T'})
    double rise_threshold = 0.0;   // (T'+1)^{-1/(2 theta - 1)}
    double max_rise = 0.0;         // sup_{t >= T'} F(X_t) - F(X_{T'})
    bool risen = false;
};

struct Trajectory {
    std::vector<Checkpoint> checkpoints;
    double final_time = 0.0;
    std::vector<double> final_state;
    double I_val = 0.0;   // int <f(X_s), alpha_s> ds  (left-endpoint sums)
    double I_noise = 0.0; // int |beta_s|_F^2 ds
    double I_trace = 0.0; // int 1/2 tr(beta^T H beta) ds
    double I_wind = 0.0;  // int | |X_s| - 1 | ds (d = 2)
    double phi = 0.0;     // unwound planar angle (d = 2)
    DropoutRecord dropout;
    TailStats tail;
    double radius_min_after1 = kInf; // over states with t >= 1 (d = 2)
    double radius_max_after1 = 0.0;
    double annulus_exit_time = kInf; // first t with X outside B(0,2) \ B(0,2/3) (d = 2)
    std::vector<BarrierObservation> barrier_observations;
    std::uint64_t n_steps = 0;
};

struct NonFiniteStateError : std::runtime_error {
    explicit NonFiniteStateError(double t)
        : std::runtime_error("state became non-finite at t = " + std::to_string(t)) {}
};

struct StepUnderflowError : std::runtime_error {
    explicit StepUnderflowError(double t)
        : std::runtime_error("stability cap forced dt below 1e-12 at t = " + std::to_string(t)) {}
};

// ---------------------------------------------------------------------------
// One Euler-Maruyama step
// ---------------------------------------------------------------------------

/// state + alpha(state, t) dt + sigma_t phi(state) sqrt(dt) noise.
inline std::vector<double> step_em(std::span<const double> state, double t, double dt, const DriftSpec& drift,
                                   const DiffusivitySpec& diff, std::span<const double> noise) {
    if (dt < 0.0) throw std::invalid_argument("step_em: dt must be >= 0");
    if (!all_finite(state)) throw NonFiniteStateError(t);
    const std::size_t d = state.size();
    std::vector<double> grad(d), alpha(d), out(d);
    drift.potential->gradient(state, grad);
    drift.eval(state, grad, alpha);
    const double beta = diff.magnitude(t, state);
    const double sq = std::sqrt(dt);
    for (std::size_t i = 0; i < d; ++i) out[i] = state[i] + alpha[i] * dt + beta * sq * noise[i];
    return out;
}

// ---------------------------------------------------------------------------
// Full trajectory simulation
// ---------------------------------------------------------------------------

inline Trajectory simulate(const SimConfig& config, const DriftSpec& drift, const DiffusivitySpec& diff,
                           const Potential& pot, const StoppingRule* rule = nullptr) {
    const std::size_t d = static_cast<std::size_t>(pot.dimension);
    if (config.x0.size() != d) throw std::invalid_argument("simulate: x0 dimension mismatch");
    if (!all_finite(config.x0)) throw std::invalid_argument("simulate: x0 must be finite");
    if (!(config.dt0 > 0.0) || config.dt_growth < 0.0 || !(config.dt_cap > 0.0) || !(config.eta_stab > 0.0) ||
        !(config.hessian_bound > 0.0))
        throw std::invalid_argument("simulate: step policy parameters must be positive");
    if (drift.mode == DriftMode::RingCounterexample) {
        if (d != 2) throw std::invalid_argument("simulate: ring drift requires d = 2");
        if (norm_sq(config.x0) == 0.0) throw std::invalid_argument("simulate: ring drift requires x0 != 0");
    }

    const std::vector<double> cps = config.checkpoint_times();
    const double tail_start = config.tail_start >= 0.0 ? config.tail_start : 0.5 * config.t_max;

    NormalStream rng(config.master_seed, config.path_index);

    Trajectory traj;
    traj.checkpoints.reserve(cps.size());
    if (config.barrier_probe.enabled)
        for (double t1 : config.barrier_probe.t1_values) {
            BarrierObservation obs;
            obs.t1 = t1;
            traj.barrier_observations.push_back(obs);
        }

    std::vector<double> x = config.x0;
    std::vector<double> grad(d), alpha(d), noise(d), x_new(d);
    double t = 0.0;
    std::size_t cp_idx = 0;

    const double theta_probe = config.barrier_probe.theta;
    const double probe_exp = 1.0 / (2.0 * theta_probe - 1.0);

    while (true) {
        // Left-endpoint evaluations at the current state.
        pot.gradient(x, grad);
        drift.eval(x, grad, alpha);
        const double F = pot.value(x);
        const double beta = diff.magnitude(t, x);
        const double trace_rate = 0.5 * beta * beta * pot.hessian_trace(x);

        if (t >= tail_start) {
            const double g2 = norm_sq(grad);
            const double fa = -dot(grad, alpha);
            const double align = (g2 < 1e-28 && fa < 1e-28) ? kInf : fa / g2;
            const double an = norm(alpha);
            const double ratio_fa = (an < 1e-14) ? kInf : norm(grad) / an;
            traj.tail.alignment_min = std::min(traj.tail.alignment_min, align);
            traj.tail.ratio_fa_min = std::min(traj.tail.ratio_fa_min, ratio_fa);
            traj.tail.beta_max = std::max(traj.tail.beta_max, beta);
            traj.tail.alpha_max = std::max(traj.tail.alpha_max, an);
            traj.tail.F_min = std::min(traj.tail.F_min, F);
            traj.tail.radius_max = std::max(traj.tail.radius_max, norm(x));
        }

        if (rule != nullptr && rule->any_enabled() && t > 0.0) {
            if (auto clause = check_rule_values(*rule, x, t, alpha, grad, F, beta, trace_rate)) {
                traj.dropout.triggered = true;
                traj.dropout.time = t;
                traj.dropout.clause = *clause;
                traj.dropout.state = x;
                // Paths count as dropped out from the trigger time onward: the
                // remaining checkpoints (a checkpoint at the trigger instant
                // included) carry the frozen state with alive = false.
                for (; cp_idx < cps.size(); ++cp_idx) {
                    Checkpoint cp;
                    cp.t = cps[cp_idx];
                    cp.x = x;
                    cp.F = F;
                    cp.grad_norm = norm(grad);
                    cp.I_val = traj.I_val;
                    cp.I_noise = traj.I_noise;
                    cp.I_trace = traj.I_trace;
                    cp.I_wind = traj.I_wind;
                    cp.phi = traj.phi;
                    cp.alive = false;
                    traj.checkpoints.push_back(std::move(cp));
                }
                break;
            }
        }

        if (cp_idx < cps.size() && t == cps[cp_idx]) {
            Checkpoint cp;
            cp.t = t;
            cp.x = x;
            cp.F = F;
            cp.grad_norm = norm(grad);
            cp.I_val = traj.I_val;
            cp.I_noise = traj.I_noise;
            cp.I_trace = traj.I_trace;
            cp.I_wind = traj.I_wind;
            cp.phi = traj.phi;
            cp.alive = true;
            traj.checkpoints.push_back(std::move(cp));
            ++cp_idx;
        }

        if (t >= config.t_max) break;

        double dt = config.step_size(t);
        if (dt < 1e-12) throw StepUnderflowError(t);
        double landing = config.t_max;
        if (cp_idx < cps.size()) landing = std::min(landing, cps[cp_idx]);
        bool lands = false;
        if (t + dt >= landing) {
            dt = landing - t;
            lands = true;
        }

        // Ito (left-endpoint) quadrature of the running integrals.
        traj.I_val += dot(grad, alpha) * dt;
        traj.I_noise += static_cast<double>(d) * beta * beta * dt;
        traj.I_trace += trace_rate * dt;
        if (d == 2) traj.I_wind += std::abs(norm(x) - 1.0) * dt;

        for (std::size_t i = 0; i < d; ++i) noise[i] = rng.normal();
        const double sq = std::sqrt(dt);
        for (std::size_t i = 0; i < d; ++i) x_new[i] = x[i] + alpha[i] * dt + beta * sq * noise[i];
        if (!all_finite(x_new)) throw NonFiniteStateError(t);

        if (d == 2) {
            // Continuous lift of the polar angle: per-step rotation increments
            // stay below pi, so summing them never wraps.
            const double cross = x[0] * x_new[1] - x[1] * x_new[0];
            const double dotp = x[0] * x_new[0] + x[1] * x_new[1];
            if (cross != 0.0 || dotp != 0.0) traj.phi += std::atan2(cross, dotp);
        }

        x.swap(x_new);
        t = lands ? landing : t + dt;
        ++traj.n_steps;

        if (d == 2) {
            const double r = norm(x);
            if (t >= 1.0) {
                traj.radius_min_after1 = std::min(traj.radius_min_after1, r);
                traj.radius_max_after1 = std::max(traj.radius_max_after1, r);
            }
            if (traj.annulus_exit_time == kInf && (r > 2.0 || r < 2.0 / 3.0)) traj.annulus_exit_time = t;
        }

        if (config.barrier_probe.enabled) {
            const double Fn = pot.value(x);
            for (auto& obs : traj.barrier_observations) {
                if (!obs.undershot) {
                    if (t >= obs.t1 && Fn - config.barrier_probe.ell < -std::pow(t + 1.0, -probe_exp)) {
                        obs.undershot = true;
                        obs.undershoot_time = t;
                        obs.undershoot_value = Fn;
                        obs.rise_threshold = std::pow(t + 1.0, -probe_exp);
                    }
                } else {
                    obs.max_rise = std::max(obs.max_rise, Fn - obs.undershoot_value);
                    if (obs.max_rise >= obs.rise_threshold) obs.risen = true;
                }
            }
        }
    }

    traj.final_time = t;
    traj.final_state = x;
    return traj;
}

// ---------------------------------------------------------------------------
// Exact simulation of dZ_s = -2 Z_s ds + (s+1)^{-1} dB_s
// ---------------------------------------------------------------------------
// The solution is Z_s = e^{-2s} Btilde_{g_s} for a Brownian motion Btilde and
// the clock g_s = int_0^s (u+1)^{-2} e^{4u} du, so increments are Gaussian
// with conditional mean e^{-2(s1-s0)} Z_{s0} and variance
// e^{-4 s1} (g_{s1} - g_{s0}). The variance is computed directly as
// int_{s0}^{s1} (u+1)^{-2} e^{-4(s1-u)} du, which never overflows.

struct QuadratureFailure : std::runtime_error {
    QuadratureFailure() : std::runtime_error("radial clock quadrature failed to converge") {}
};

/// g_s by adaptive quadrature; only usable while e^{4s} is representable.
inline double radial_clock(double s, double rel_tol = 1e-10) {
    if (s < 0.0) throw std::invalid_argument("radial_clock: s must be >= 0");
    if (s > 170.0) throw std::invalid_argument("radial_clock: e^{4s} overflows; use increment variances");
    auto res = integrate([](double u) { return std::exp(4.0 * u) / ((u + 1.0) * (u + 1.0)); }, 0.0, s, rel_tol);
    if (!res.converged) throw QuadratureFailure();
    return res.value;
}

/// e^{-4 s1} (g_{s1} - g_{s0}) for s0 <= s1, overflow-free.
inline double radial_increment_variance(double s0, double s1, double rel_tol = 1e-10) {
    if (!(s1 >= s0)) throw std::invalid_argument("radial_increment_variance: need s1 >= s0");
    if (s1 == s0) return 0.0;
    // The exponential kernel makes everything below s1 - 18 negligible
    // (e^{-72} ~ 5e-32 relative).
    const double lo = std::max(s0, s1 - 18.0);
    auto res = integrate([s1](double u) { return std::exp(-4.0 * (s1 - u)) / ((u + 1.0) * (u + 1.0)); }, lo, s1,
                         rel_tol);
    if (!res.converged) throw QuadratureFailure();
    return res.value;
}

struct RadialExactPath {
    std::vector<double> times;
    std::vector<double> values;
};

/// Samples Z at the given times (strictly increasing, all > t_start), exact in
/// distribution: no discretization bias.
inline RadialExactPath simulate_radial_exact(double t_start, double z0, std::span<const double> sample_times,
                                             std::uint64_t seed, std::uint64_t path_index = 0) {
    RadialExactPath path;
    path.times.assign(sample_times.begin(), sample_times.end());
    path.values.resize(path.times.size());
    NormalStream rng(seed, path_index);
    double prev = t_start;
    double z = z0;
    for (std::size_t i = 0; i < path.times.size(); ++i) {
        const double s = path.times[i];
        if (!(s > prev)) throw std::invalid_argument("simulate_radial_exact: times must increase from t_start");
        const double var = radial_increment_variance(prev, s);
        z = std::exp(-2.0 * (s - prev)) * z + std::sqrt(var) * rng.normal();
        path.values[i] = z;
        prev = s;
    }
    return path;
}

/// Uniform-grid convenience: samples on (t_start, horizon] with spacing dt.
inline RadialExactPath simulate_radial_exact(double t_start, double z0, double horizon, std::uint64_t seed,
                                             double dt = 0.05, std::uint64_t path_index = 0) {
    if (!(horizon > t_start)) throw std::invalid_argument("simulate_radial_exact: horizon must exceed t_start");
    std::vector<double> times;
    const auto n = static_cast<std::size_t>(std::ceil((horizon - t_start) / dt));
    times.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) times.push_back(std::min(t_start + dt * static_cast<double>(i), horizon));
    if (times.size() >= 2 && times[times.size() - 2] >= times.back()) times.pop_back();
    return simulate_radial_exact(t_start, z0, times, seed, path_index);
}

} // namespace cooldown
