#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cooldown/estimates.hpp"
#include "cooldown/monitors.hpp"
#include "cooldown/oracles.hpp"
#include "cooldown/sde_engine.hpp"

namespace cooldown {

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

struct EnsembleConfig {
    int n_paths = 2;
    SimConfig sim; // template; path_index is assigned per path
    DriftSpec drift;
    DiffusivitySpec diffusivity;
    std::optional<StoppingRule> rule;
    int workers = 0; // 0 = hardware concurrency
};

struct PathResult {
    Trajectory trajectory;
    EventReport report;
    bool failed = false;
    std::string error;
};

struct EnsembleResult {
    std::vector<PathResult> paths;
    int n_failed = 0;
};

/// N independent trajectories with streams keyed (master_seed, path_index).
/// Paths are distributed over workers; results land in path-index order, so
/// every aggregate downstream is identical for any worker count.
inline EnsembleResult run_ensemble(const EnsembleConfig& cfg) {
    if (cfg.n_paths < 2) throw std::invalid_argument("run_ensemble: need at least 2 paths");
    EnsembleResult result;
    result.paths.resize(static_cast<std::size_t>(cfg.n_paths));

    unsigned workers = cfg.workers > 0 ? static_cast<unsigned>(cfg.workers) : std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    workers = std::min<unsigned>(workers, static_cast<unsigned>(cfg.n_paths));

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= cfg.n_paths) return;
            PathResult& slot = result.paths[static_cast<std::size_t>(i)];
            SimConfig sc = cfg.sim;
            sc.path_index = static_cast<std::uint64_t>(i);
            try {
                slot.trajectory =
                    simulate(sc, cfg.drift, cfg.diffusivity, *cfg.drift.potential,
                             cfg.rule.has_value() ? &cfg.rule.value() : nullptr);
                slot.report = event_report(slot.trajectory);
            } catch (const std::exception& e) {
                slot.failed = true;
                slot.error = e.what();
            }
        }
    };

    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& p : result.paths)
        if (p.failed) ++result.n_failed;
    return result;
}

// ---------------------------------------------------------------------------
// Survival-restricted moments
// ---------------------------------------------------------------------------

/// w_t = c_w (t+1)^{-exponent}; enters both the dropout barrier and the
/// reported moment.
struct WSpec {
    double c_w = 0.0;
    double exponent = 2.0;

    double operator()(double t) const { return c_w == 0.0 ? 0.0 : c_w * std::pow(t + 1.0, -exponent); }

    static WSpec for_theta(double c_w, double theta) { return {c_w, 1.0 / (2.0 * theta - 1.0)}; }
};

/// Mean over paths of 1{not yet dropped out} (F(X_t) - ell + w_t) at each
/// checkpoint. Dropped-out paths contribute exactly zero from their trigger
/// time on. Failed paths are excluded (they are reported by run_ensemble).
inline MomentCurve restricted_moment(const EnsembleResult& ensemble, double ell, const WSpec& w) {
    const PathResult* first = nullptr;
    for (const auto& p : ensemble.paths)
        if (!p.failed) {
            first = &p;
            break;
        }
    if (first == nullptr) throw std::invalid_argument("restricted_moment: no successful paths");
    const std::size_t n_cp = first->trajectory.checkpoints.size();

    MomentCurve curve;
    curve.t.resize(n_cp);
    curve.mean.assign(n_cp, 0.0);
    curve.stderr_.assign(n_cp, 0.0);
    curve.survival.assign(n_cp, 0.0);
    curve.n_alive.assign(n_cp, 0);
    for (std::size_t k = 0; k < n_cp; ++k) curve.t[k] = first->trajectory.checkpoints[k].t;

    std::vector<double> sum(n_cp, 0.0), sum_sq(n_cp, 0.0);
    double n_used = 0.0;
    for (const auto& p : ensemble.paths) {
        if (p.failed) continue;
        if (p.trajectory.checkpoints.size() != n_cp)
            throw std::invalid_argument("restricted_moment: paths disagree on checkpoints");
        n_used += 1.0;
        for (std::size_t k = 0; k < n_cp; ++k) {
            const auto& cp = p.trajectory.checkpoints[k];
            const double contrib = cp.alive ? (cp.F - ell + w(cp.t)) : 0.0;
            sum[k] += contrib;
            sum_sq[k] += contrib * contrib;
            if (cp.alive) curve.n_alive[k] += 1;
        }
    }
    for (std::size_t k = 0; k < n_cp; ++k) {
        curve.mean[k] = sum[k] / n_used;
        const double var = (sum_sq[k] - sum[k] * sum[k] / n_used) / std::max(1.0, n_used - 1.0);
        curve.stderr_[k] = std::sqrt(std::max(0.0, var) / n_used);
        curve.survival[k] = curve.n_alive[k] / n_used;
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Counterexample suite
// ---------------------------------------------------------------------------

struct WindingIncrement {
    double t_lo = 0.0, t_hi = 0.0;
    double mean = 0.0, stderr_ = 0.0;
};

struct CounterexampleReport {
    double radial_fraction = 0.0; // fraction of paths ending with ||X|-1| < radial_tol
    double radial_tol = 0.05;
    std::vector<WindingIncrement> winding;
    double noise_energy_max = 0.0;
    double noise_energy_cap = 0.0; // d * sup(phi)^2 * int_0^inf sigma^2
    double exit_fraction = 0.0;    // paths leaving B(0,2) \ B(0,2/3) after t = 1
    int n_failed = 0;
    std::vector<double> phi_t;    // checkpoint times
    std::vector<double> phi_mean; // mean unwound angle per checkpoint
    bool pass_radial = false;
    bool pass_noise = false;
    bool pass_winding = false;
    bool pass = false;
};

inline CounterexampleReport counterexample_suite(const EnsembleConfig& base,
                                                 std::vector<double> decade_edges = {125.0, 250.0, 500.0, 1000.0},
                                                 double radial_tol = 0.05, double min_radial_fraction = 0.95,
                                                 double min_winding = 0.15) {
    if (base.drift.mode != DriftMode::RingCounterexample || base.drift.potential->dimension != 2)
        throw std::invalid_argument("counterexample_suite: needs the ring drift in dimension 2");
    EnsembleConfig cfg = base;
    for (double e : decade_edges)
        if (e <= cfg.sim.t_max) cfg.sim.extra_checkpoints.push_back(e);

    const EnsembleResult ensemble = run_ensemble(cfg);

    CounterexampleReport rep;
    rep.radial_tol = radial_tol;
    rep.n_failed = ensemble.n_failed;
    rep.noise_energy_cap = 2.0 * cfg.diffusivity.schedule.squared_tail_integral(0.0);

    const PathResult* first = nullptr;
    for (const auto& p : ensemble.paths)
        if (!p.failed) {
            first = &p;
            break;
        }
    if (first == nullptr) throw std::runtime_error("counterexample_suite: all paths failed");
    const auto& cps = first->trajectory.checkpoints;
    auto cp_index = [&cps](double t) {
        for (std::size_t k = 0; k < cps.size(); ++k)
            if (std::abs(cps[k].t - t) < 1e-9) return k;
        throw std::logic_error("counterexample_suite: decade edge missing from checkpoints");
    };

    rep.phi_t.resize(cps.size());
    rep.phi_mean.assign(cps.size(), 0.0);
    for (std::size_t k = 0; k < cps.size(); ++k) rep.phi_t[k] = cps[k].t;

    double n_used = 0.0, n_radial = 0.0, n_exit = 0.0;
    for (const auto& p : ensemble.paths) {
        if (p.failed) continue;
        n_used += 1.0;
        const auto& tr = p.trajectory;
        if (std::abs(norm(tr.final_state) - 1.0) < radial_tol) n_radial += 1.0;
        rep.noise_energy_max = std::max(rep.noise_energy_max, tr.I_noise);
        if (tr.radius_min_after1 < 2.0 / 3.0 || tr.radius_max_after1 > 2.0) n_exit += 1.0;
        for (std::size_t k = 0; k < cps.size(); ++k) rep.phi_mean[k] += tr.checkpoints[k].phi;
    }
    for (auto& m : rep.phi_mean) m /= n_used;
    rep.radial_fraction = n_radial / n_used;
    rep.exit_fraction = n_exit / n_used;

    for (std::size_t e = 0; e + 1 < decade_edges.size(); ++e) {
        const std::size_t klo = cp_index(decade_edges[e]);
        const std::size_t khi = cp_index(decade_edges[e + 1]);
        double s = 0.0, s2 = 0.0;
        for (const auto& p : ensemble.paths) {
            if (p.failed) continue;
            const double d = p.trajectory.checkpoints[khi].phi - p.trajectory.checkpoints[klo].phi;
            s += d;
            s2 += d * d;
        }
        WindingIncrement w;
        w.t_lo = decade_edges[e];
        w.t_hi = decade_edges[e + 1];
        w.mean = s / n_used;
        w.stderr_ = std::sqrt(std::max(0.0, (s2 - s * s / n_used) / (n_used - 1.0)) / n_used);
        rep.winding.push_back(w);
    }

    rep.pass_radial = rep.radial_fraction >= min_radial_fraction;
    rep.pass_noise = rep.noise_energy_max <= rep.noise_energy_cap + 1e-9;
    rep.pass_winding = true;
    for (const auto& w : rep.winding)
        if (!(w.mean >= min_winding)) rep.pass_winding = false;
    for (std::size_t e = 0; e + 1 < rep.winding.size(); ++e) {
        const auto& a = rep.winding[e];
        const auto& b = rep.winding[e + 1];
        const double se = std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
        if (b.mean < a.mean - 3.0 * se) rep.pass_winding = false; // decreasing trend beyond noise
    }
    rep.pass = rep.pass_radial && rep.pass_noise && rep.pass_winding && rep.n_failed == 0;
    return rep;
}

// ---------------------------------------------------------------------------
// Dropout domination
// ---------------------------------------------------------------------------

struct DropoutProbe {
    double t1 = 0.0;
    int n_undershot = 0;
    int n_risen = 0;
    double empirical = 0.0; // P(undershoot after t1 and later rise by 2 kappa_{T'})
    double stderr_ = 0.0;
    double bound = 0.0; // phi(rho/(2C) (t1+1)^{2 sigma - 1/(2 theta - 1)})
    double bound_argument = 0.0;
    bool pass = false;
};

struct DropoutReport {
    std::vector<DropoutProbe> probes;
    int n_paths = 0;
    int n_failed = 0;
    bool pass = false;
};

/// Empirical check of the post-undershoot escape bound: after F first crosses
/// below ell - (t+1)^{-1/(2 theta - 1)} at T' >= t1, the chance that F later
/// rises by 2 kappa_{T'} is dominated by the phi series bound.
inline DropoutReport dropout_probability_check(const EnsembleConfig& base, std::vector<double> t1_values, double ell,
                                               double theta, double rho, double C, double sigma) {
    EnsembleConfig cfg = base;
    cfg.sim.barrier_probe.enabled = true;
    cfg.sim.barrier_probe.ell = ell;
    cfg.sim.barrier_probe.theta = theta;
    cfg.sim.barrier_probe.t1_values = t1_values;

    const EnsembleResult ensemble = run_ensemble(cfg);

    DropoutReport rep;
    rep.n_paths = cfg.n_paths;
    rep.n_failed = ensemble.n_failed;
    const double n_used = static_cast<double>(cfg.n_paths - ensemble.n_failed);
    rep.pass = true;
    for (std::size_t j = 0; j < t1_values.size(); ++j) {
        DropoutProbe probe;
        probe.t1 = t1_values[j];
        for (const auto& p : ensemble.paths) {
            if (p.failed) continue;
            const auto& obs = p.trajectory.barrier_observations[j];
            if (obs.undershot) ++probe.n_undershot;
            if (obs.risen) ++probe.n_risen;
        }
        probe.empirical = probe.n_risen / n_used;
        probe.stderr_ = std::sqrt(probe.empirical * (1.0 - probe.empirical) / n_used);
        probe.bound_argument =
            rho / (2.0 * C) * std::pow(probe.t1 + 1.0, 2.0 * sigma - 1.0 / (2.0 * theta - 1.0));
        probe.bound = phi_kappa(probe.bound_argument).value;
        probe.pass = probe.bound >= probe.empirical - 3.0 * probe.stderr_;
        if (!probe.pass) rep.pass = false;
        rep.probes.push_back(probe);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// OU oracle equivalence
// ---------------------------------------------------------------------------
// dZ = -2 Z ds + (s+1)^{-1} dB is gradient flow on z^2 with the (t+1)^{-1}
// cooling law, so the engine's Euler-Maruyama path must agree in law with the
// exact time-change simulation.

struct OuComparison {
    double s = 0.0;
    double mean_em = 0.0, mean_exact = 0.0, se_mean = 0.0; // combined stderr
    double var_em = 0.0, var_exact = 0.0, se_var = 0.0;    // combined stderr
    double var_formula = 0.0; // e^{-4s}(g_s - g_0), by quadrature
    double max_z = 0.0;       // largest standardized discrepancy at this time
};

inline std::vector<OuComparison> ou_equivalence_check(int n_paths, double z0, std::vector<double> times,
                                                      std::uint64_t seed, double dt = 1e-3) {
    // EM side through the full engine.
    EnsembleConfig em;
    em.n_paths = n_paths;
    static const Potential quad = even_power_well(1, 1);
    em.drift = DriftSpec{DriftMode::GradientFlow, &quad};
    em.diffusivity = DiffusivitySpec{Schedule::parse("poly:1:1"), SpatialFactor::Identity};
    em.sim.x0 = {z0};
    em.sim.t_max = times.back();
    em.sim.dt0 = dt;
    em.sim.dt_growth = 0.0;
    em.sim.dt_cap = dt;
    em.sim.eta_stab = 1.0;
    em.sim.hessian_bound = 1.0;
    em.sim.master_seed = seed;
    em.sim.checkpoint_count = 2;
    em.sim.extra_checkpoints = times;
    const EnsembleResult ens = run_ensemble(em);

    // Exact side: increments of e^{-2s} Btilde_{g_s} over the same times.
    std::vector<double> decay(times.size()), sd(times.size());
    double prev = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        decay[k] = std::exp(-2.0 * (times[k] - prev));
        sd[k] = std::sqrt(radial_increment_variance(prev, times[k]));
        prev = times[k];
    }
    std::vector<std::vector<double>> exact(times.size());
    for (auto& v : exact) v.reserve(static_cast<std::size_t>(n_paths));
    for (int p = 0; p < n_paths; ++p) {
        NormalStream rng(seed ^ 0x5DEECE66Dull, static_cast<std::uint64_t>(p));
        double z = z0;
        for (std::size_t k = 0; k < times.size(); ++k) {
            z = decay[k] * z + sd[k] * rng.normal();
            exact[k].push_back(z);
        }
    }

    auto moments = [](std::span<const double> v) {
        const double n = static_cast<double>(v.size());
        double m = 0.0;
        for (double x : v) m += x;
        m /= n;
        double var = 0.0;
        for (double x : v) var += (x - m) * (x - m);
        var /= (n - 1.0);
        return std::pair{m, var};
    };

    std::vector<OuComparison> out;
    for (std::size_t k = 0; k < times.size(); ++k) {
        std::vector<double> em_vals;
        em_vals.reserve(static_cast<std::size_t>(n_paths));
        for (const auto& p : ens.paths) {
            if (p.failed) continue;
            for (const auto& cp : p.trajectory.checkpoints)
                if (std::abs(cp.t - times[k]) < 1e-9) em_vals.push_back(cp.x[0]);
        }
        const auto [m1, v1] = moments(em_vals);
        const auto [m2, v2] = moments(exact[k]);
        OuComparison c;
        c.s = times[k];
        c.mean_em = m1;
        c.mean_exact = m2;
        const double n1 = static_cast<double>(em_vals.size()), n2 = static_cast<double>(exact[k].size());
        c.se_mean = std::sqrt(v1 / n1 + v2 / n2);
        c.var_em = v1;
        c.var_exact = v2;
        c.se_var = std::sqrt(2.0 * v1 * v1 / (n1 - 1.0) + 2.0 * v2 * v2 / (n2 - 1.0));
        c.var_formula = std::exp(-4.0 * times[k]) * (radial_clock(times[k]) - 0.0);
        c.max_z = std::max(std::abs(m1 - m2) / c.se_mean, std::abs(v1 - v2) / c.se_var);
        out.push_back(c);
    }
    return out;
}

} // namespace cooldown
