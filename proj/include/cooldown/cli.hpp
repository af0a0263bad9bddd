#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cooldown/config.hpp"
#include "cooldown/io.hpp"
#include "cooldown/oracles.hpp"

namespace cooldown::cli {

inline constexpr const char* kVersion = "0.1.0";

inline int resolve_workers(int configured) {
    if (configured > 0) return configured;
    if (const char* env = std::getenv("COOLDOWN_SDE_WORKERS")) {
        try {
            const int w = std::stoi(env);
            if (w > 0) return w;
        } catch (const std::exception&) {
            // fall through to auto
        }
    }
    return 0; // auto
}

// ---------------------------------------------------------------------------
// Oracle suite
// ---------------------------------------------------------------------------

struct OracleEntry {
    std::string name;
    double expected = 0.0;
    double actual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// Closed-form and Monte Carlo cross-checks. Dominance-style entries pass when
/// actual >= expected - tolerance; everything else is two-sided.
inline std::vector<OracleEntry> run_oracle_suite(const ExperimentConfig& cfg) {
    std::vector<OracleEntry> out;
    auto two_sided = [&out](const std::string& name, double expected, double actual, double tol) {
        out.push_back({name, expected, actual, tol, std::abs(actual - expected) <= tol});
    };
    auto lower_bound = [&out](const std::string& name, double expected, double actual, double tol) {
        out.push_back({name, expected, actual, tol, actual >= expected - tol});
    };

    // phi(kappa): series value, truncation stability, monotonicity, dominance.
    two_sided("phi(1)", 2.693, phi_kappa(1.0).value, 0.01);
    two_sided("phi(10)", 0.28, phi_kappa(10.0).value, 0.01);
    double prev = kInf;
    bool monotone = true;
    for (double k : cfg.kappas) {
        const SeriesBound sb = phi_kappa(k);
        if (sb.value >= prev) monotone = false;
        prev = sb.value;
        lower_bound("phi_dominates_bm_tail(kappa=" + detail::csv_num(k) + ")", bm_drift_overshoot_tail(k), sb.value,
                    0.0);
        // Recompute with 20 extra terms; truncation must not move the value.
        double extended = sb.value;
        for (int n = sb.truncation_index; n < sb.truncation_index + 20; ++n) {
            const double p2 = std::pow(2.0, n);
            extended += 2.0 * p2 / ((p2 + k) * (p2 + k));
        }
        two_sided("phi_truncation_stable(kappa=" + detail::csv_num(k) + ")", sb.value, extended, 1e-10 * sb.value);
    }
    out.push_back({"phi_monotone", 1.0, monotone ? 1.0 : 0.0, 0.0, monotone});

    // Brownian overshoot identity P(sup W_t - t >= 1) = e^{-2}.
    const McEstimate mc = bm_overshoot_mc(1.0, cfg.mc_paths, cfg.mc_horizon, cfg.mc_dt, cfg.seed);
    two_sided("bm_overshoot_mc(kappa=1)", bm_drift_overshoot_tail(1.0), mc.value, 3.0 * mc.stderr_);
    lower_bound("phi(1)_dominates_mc", mc.value, phi_kappa(1.0).value, 0.0);

    // Half-normal constant: quadrature and the exact radial simulation.
    two_sided("half_normal_quadrature", half_normal_constant(), half_normal_quadrature(), 1e-10);
    {
        const int n = 4000;
        const double s = 2.0;
        const double sd = std::sqrt(radial_increment_variance(0.0, s));
        double sum = 0.0, sum_sq = 0.0;
        for (int p = 0; p < n; ++p) {
            NormalStream rng(cfg.seed + 77, static_cast<std::uint64_t>(p));
            const double ratio = std::abs(sd * rng.normal()) / sd;
            sum += ratio;
            sum_sq += ratio * ratio;
        }
        const double mean = sum / n;
        const double var = (sum_sq - sum * sum / n) / (n - 1.0);
        two_sided("half_normal_mc(s=2)", half_normal_constant(), mean, 3.0 * std::sqrt(var / n));
    }

    // Clock asymptotics and the telescoped increment-variance identity.
    {
        const double s = 8.0;
        const double ratio = radial_clock(s) / (0.25 * std::pow(s + 1.0, -2.0) * std::exp(4.0 * s));
        two_sided("g_asymptotic(s=8)", 1.0, ratio, 0.07);
        const std::vector<double> grid = {1.0, 2.0, 3.5, 5.0};
        double composed = 0.0;
        double lo = 0.0;
        for (double hi : grid) {
            composed = composed * std::exp(-4.0 * (hi - lo)) + radial_increment_variance(lo, hi);
            lo = hi;
        }
        const double direct = std::exp(-4.0 * 5.0) * radial_clock(5.0);
        two_sided("radial_variance_telescope(s=5)", direct, composed, 1e-8 * direct);
    }

    // Winding growth: E int |Z| ~ (kappa/2) log u, variance of the integral <= 1.
    {
        const WindingGrowth wg = winding_integral_growth(0.0, 1000.0, 400, cfg.seed + 99);
        two_sided("winding_slope", wg.target, wg.slope, 0.05);
        lower_bound("winding_variance_bound", wg.integral_variance, 1.0, 0.0);
    }

    // Deterministic decay exponents 1/(2 theta - 1) = p/(p-1).
    {
        const Potential p2 = even_power_well(2, 1);
        const std::vector<double> x0 = {1.0};
        two_sided("deterministic_rate(p=2)", 2.0, deterministic_rate(p2, p2.critical_levels[0], x0, 1e4).estimate.exponent,
                  0.05);
        const Potential p3 = even_power_well(3, 1);
        two_sided("deterministic_rate(p=3)", 1.5, deterministic_rate(p3, p3.critical_levels[0], x0, 1e4).estimate.exponent,
                  0.05);
    }

    // Euler-Maruyama vs exact time-change simulation of the cooled OU process.
    {
        const auto cmp = ou_equivalence_check(10000, 0.3, {1.0, 2.0, 5.0}, cfg.seed + 7);
        double worst = 0.0;
        double worst_var_gap = 0.0;
        for (const auto& c : cmp) {
            worst = std::max(worst, c.max_z);
            worst_var_gap = std::max(worst_var_gap, std::abs(c.var_exact - c.var_formula) / c.var_formula);
        }
        two_sided("ou_exact_vs_em(max_zscore)", 0.0, worst, 3.0);
        // exact-simulation sample variance sits on the quadrature formula
        two_sided("ou_exact_variance_vs_formula(rel)", 0.0, worst_var_gap, 0.10);
    }

    return out;
}

inline ordered_json oracle_report_json(const std::vector<OracleEntry>& entries) {
    ordered_json arr = ordered_json::array();
    bool all = true;
    for (const auto& e : entries) {
        ordered_json j;
        j["name"] = e.name;
        j["expected"] = detail::json_num(e.expected);
        j["actual"] = detail::json_num(e.actual);
        j["tolerance"] = detail::json_num(e.tolerance);
        j["pass"] = e.pass;
        arr.push_back(j);
        all = all && e.pass;
    }
    ordered_json rep;
    rep["checks"] = arr;
    rep["pass"] = all;
    return rep;
}

// ---------------------------------------------------------------------------
// Experiment dispatch
// ---------------------------------------------------------------------------

inline int run_experiment(const ExperimentConfig& raw, const std::filesystem::path& out_dir) {
    ResolvedExperiment exp(raw);
    const ExperimentConfig& cfg = exp.config();
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "manifest.json", manifest_json(cfg, out_dir.string()).dump(2) + "\n");

    if (cfg.kind == "rate") {
        EnsembleConfig ens = exp.ensemble_config();
        ens.workers = resolve_workers(cfg.workers);
        const EnsembleResult result = run_ensemble(ens);
        const MomentCurve curve =
            restricted_moment(result, cfg.rule_ell, WSpec::for_theta(cfg.c_w, cfg.theta));
        write_text_file(out_dir / "moments.csv", moments_csv(curve));
        const RateEstimate est = fit_rate(curve, exp.fit_window_lo(), exp.fit_window_hi());
        const double predicted = exp.schedule().kind == Schedule::Kind::Polynomial
                                     ? predicted_exponent(cfg.theta, exp.schedule().exponent)
                                     : 1.0 / (2.0 * cfg.theta - 1.0);
        const ordered_json j =
            estimate_json(est, predicted, cfg.tolerance, cfg.paths, result.n_failed, curve.survival.back());
        write_text_file(out_dir / "estimate.json", j.dump(2) + "\n");
        std::cout << (j["pass"].get<bool>() ? "PASS" : "FAIL") << " rate: fitted " << est.exponent << " +- "
                  << est.exponent_stderr << ", predicted " << predicted << " +- " << cfg.tolerance << "\n";
        return j["pass"].get<bool>() ? 0 : 2;
    }

    if (cfg.kind == "simulate") {
        SimConfig sim = exp.sim_config();
        const EnsembleConfig ens = exp.ensemble_config();
        const Trajectory traj = simulate(sim, ens.drift, ens.diffusivity, exp.potential(),
                                         ens.rule.has_value() ? &ens.rule.value() : nullptr);
        write_text_file(out_dir / "trajectory.csv", trajectory_csv(traj, exp.potential().dimension));
        write_text_file(out_dir / "event_report.json", event_report_json(event_report(traj)).dump(2) + "\n");
        std::cout << "simulate: " << traj.n_steps << " steps to t = " << traj.final_time << "\n";
        return 0;
    }

    if (cfg.kind == "counterexample") {
        EnsembleConfig ens = exp.ensemble_config();
        ens.workers = resolve_workers(cfg.workers);
        ens.rule.reset(); // the suite watches the annulus itself
        const CounterexampleReport rep = counterexample_suite(ens, cfg.decades, cfg.radial_tol,
                                                              cfg.min_radial_fraction, cfg.min_winding);
        write_text_file(out_dir / "counterexample.json", counterexample_json(rep).dump(2) + "\n");
        std::cout << (rep.pass ? "PASS" : "FAIL") << " counterexample: radial " << rep.radial_fraction
                  << ", noise max " << rep.noise_energy_max << " (cap " << rep.noise_energy_cap << ")\n";
        return rep.pass ? 0 : 2;
    }

    if (cfg.kind == "oracle-check") {
        const auto entries = run_oracle_suite(cfg);
        const ordered_json rep = oracle_report_json(entries);
        write_text_file(out_dir / "oracle_report.json", rep.dump(2) + "\n");
        for (const auto& e : entries)
            std::cout << (e.pass ? "PASS " : "FAIL ") << e.name << ": actual " << e.actual << " expected "
                      << e.expected << " tol " << e.tolerance << "\n";
        return rep["pass"].get<bool>() ? 0 : 2;
    }

    if (cfg.kind == "dropout-check") {
        EnsembleConfig ens = exp.ensemble_config();
        ens.workers = resolve_workers(cfg.workers);
        if (ens.rule) ens.rule->enable_lower_dropout = false; // observe undershoots, do not stop on them
        const double premise_c = exp.schedule().scale * exp.schedule().scale;
        const DropoutReport rep = dropout_probability_check(ens, cfg.t1, cfg.rule_ell, cfg.theta, cfg.rule_rho,
                                                            premise_c, exp.schedule().exponent);
        write_text_file(out_dir / "dropout_report.json", dropout_report_json(rep).dump(2) + "\n");
        std::cout << (rep.pass ? "PASS" : "FAIL") << " dropout-check\n";
        return rep.pass ? 0 : 2;
    }

    throw ConfigError("unknown experiment kind '" + cfg.kind + "'");
}

// ---------------------------------------------------------------------------
// Plot-ready data files
// ---------------------------------------------------------------------------

inline int emit_plot_data(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    bool produced = false;
    if (fs::exists(dir / "moments.csv")) {
        const MomentCurve curve = parse_moments_csv(read_text_file(dir / "moments.csv"));
        std::string pts = "log10_t,log10_mean\n";
        std::size_t n_pos = 0;
        for (std::size_t i = 0; i < curve.t.size(); ++i) {
            if (!(curve.mean[i] > 0.0)) continue;
            pts += detail::csv_num(std::log10(curve.t[i])) + "," + detail::csv_num(std::log10(curve.mean[i])) + "\n";
            ++n_pos;
        }
        if (n_pos == 0) throw std::runtime_error("plot-data: no positive moments in " + (dir / "moments.csv").string());
        write_text_file(dir / "plot_moments.csv", pts);

        double predicted = 0.0;
        if (fs::exists(dir / "estimate.json")) {
            const auto est = ordered_json::parse(read_text_file(dir / "estimate.json"));
            predicted = est.at("predicted_exponent").get<double>();
        }
        // reference line anchored at the first positive point
        std::size_t anchor = 0;
        while (anchor < curve.t.size() && !(curve.mean[anchor] > 0.0)) ++anchor;
        std::string ref = "log10_t,log10_ref\n";
        for (std::size_t i = anchor; i < curve.t.size(); ++i) {
            const double v = curve.mean[anchor] *
                             std::pow((curve.t[i] + 1.0) / (curve.t[anchor] + 1.0), -predicted);
            ref += detail::csv_num(std::log10(curve.t[i])) + "," + detail::csv_num(std::log10(v)) + "\n";
        }
        write_text_file(dir / "plot_reference.csv", ref);
        produced = true;
    }
    if (fs::exists(dir / "counterexample.json")) {
        const auto rep = ordered_json::parse(read_text_file(dir / "counterexample.json"));
        const auto ts = rep.at("phi_t").get<std::vector<double>>();
        const auto phis = rep.at("phi_mean").get<std::vector<double>>();
        std::string w = "log10_t,phi_mean\n";
        for (std::size_t i = 0; i < ts.size(); ++i)
            w += detail::csv_num(std::log10(ts[i])) + "," + detail::csv_num(phis[i]) + "\n";
        write_text_file(dir / "plot_winding.csv", w);
        produced = true;
    }
    if (!produced) throw std::runtime_error("plot-data: no moments.csv or counterexample.json under " + dir.string());
    return 0;
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

inline int main_impl(int argc, const char* const* argv) {
    CLI::App app{"cooldown_sde: simulation lab for SDEs with decaying diffusivity"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path, out_dir, plot_dir;
    std::vector<std::string> overrides;
    std::int64_t seed = -1;
    int workers = -1;

    auto add_common = [&](CLI::App* cmd, bool config_required) {
        cmd->add_option("--config", config_path, "config file (INI or a manifest.json)")
            ->required(config_required);
        cmd->add_option("--seed", seed, "override the master seed");
        cmd->add_option("--workers", workers, "cap worker threads (env COOLDOWN_SDE_WORKERS as fallback)");
        cmd->add_option("--out", out_dir, "output directory (default: the config's experiment.out)");
        cmd->add_option("--set", overrides, "override a config value, section.key=value")->take_all();
    };

    auto* run_cmd = app.add_subcommand("run", "run the experiment described by a config file");
    add_common(run_cmd, true);
    auto* oracle_cmd = app.add_subcommand("oracle-check", "run the closed-form oracle suite");
    add_common(oracle_cmd, false);
    auto* plot_cmd = app.add_subcommand("plot-data", "emit plot-ready files from run outputs");
    plot_cmd->add_option("--dir", plot_dir, "run output directory")->required();
    auto* validate_cmd = app.add_subcommand("validate-config", "parse, validate and echo the resolved config");
    add_common(validate_cmd, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (plot_cmd->parsed()) return emit_plot_data(plot_dir);

        ExperimentConfig cfg;
        if (!config_path.empty()) cfg = load_config_file(config_path);
        // Precedence: config file, then --set in order, then explicit flags.
        for (const auto& o : overrides) apply_override(cfg, o);
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        if (workers >= 0) cfg.workers = workers;

        if (validate_cmd->parsed()) {
            ResolvedExperiment resolved(cfg); // throws on invalid configs
            std::cout << serialize_config(resolved.config());
            return 0;
        }
        if (oracle_cmd->parsed()) cfg.kind = "oracle-check";
        return run_experiment(cfg, out_dir.empty() ? cfg.out : out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace cooldown::cli
