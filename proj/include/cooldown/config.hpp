#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cooldown/experiments.hpp"
#include "cooldown/potentials.hpp"
#include "cooldown/schedules.hpp"
#include "cooldown/sde_engine.hpp"

namespace cooldown {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// ExperimentConfig: everything a run needs, in config-file form
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    // [experiment]
    std::string kind = "rate"; // rate | simulate | counterexample | oracle-check | dropout-check
    std::string potential = "even_power:2:1";
    std::string drift = "gradient_flow";
    std::string schedule = "poly:1:1.2";
    std::string spatial = "auto"; // identity | mollifier | auto (mollifier for the ring drift)
    std::uint64_t seed = 1;
    int paths = 2000;
    double theta = 0.75;
    double c_w = 0.0;
    double fit_lo = -1.0; // -1: t_max / 100 (final two decades)
    double fit_hi = -1.0; // -1: t_max
    double tolerance = 0.25;
    int workers = 0; // 0: hardware concurrency (or COOLDOWN_SDE_WORKERS)
    std::string out = "out"; // output directory; the --out flag overrides

    // [sim]
    std::vector<double> x0 = {1.0};
    double t_max = 1e4;
    double dt0 = 1e-3;
    double dt_growth = 1e-4;
    double dt_cap = 0.1;
    double eta_stab = 0.1;
    double hessian_bound = 1.0;
    int checkpoints = 64;
    double tail_start = -1.0; // -1: t_max / 2

    // [rule]
    std::string rule_enabled = "exit,alignment,beta_cap,lower_dropout";
    double rule_radius = 3.0;
    double rule_rho = 0.5;
    double rule_c = 100.0;
    double rule_c_beta = 2.0;
    double rule_sigma = -1.0; // -1: schedule exponent
    double rule_ell = 0.0;
    double rule_t0 = 0.0;

    // [counterexample]
    std::vector<double> decades = {125.0, 250.0, 500.0, 1000.0};
    double radial_tol = 0.05;
    double min_radial_fraction = 0.95;
    double min_winding = 0.15;

    // [oracle]
    std::vector<double> kappas = {0.5, 1.0, 2.0, 5.0, 10.0};
    std::uint64_t mc_paths = 100000;
    double mc_horizon = 50.0;
    double mc_dt = 0.05;

    // [dropout]
    std::vector<double> t1 = {100.0, 400.0};

    bool operator==(const ExperimentConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Key table: one row per (section, key); drives parsing, serialization,
// overrides and the manifest round-trip.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid number '" + s + "' for " + where);
    }
}

inline std::int64_t parse_int(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const std::int64_t v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid integer '" + s + "' for " + where);
    }
}

inline std::vector<double> parse_list(const std::string& s, const std::string& where) {
    std::vector<double> out;
    std::string token;
    std::stringstream ss(s);
    while (std::getline(ss, token, ',')) {
        // trim
        const auto b = token.find_first_not_of(" \t");
        const auto e = token.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(parse_double(token.substr(b, e - b + 1), where));
    }
    if (out.empty()) throw ConfigError("empty list for " + where);
    return out;
}

inline std::string format_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double(v[i]);
    }
    return out;
}

struct KeyEntry {
    std::string section, key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

inline const std::vector<KeyEntry>& key_table() {
    static const std::vector<KeyEntry> table = [] {
        std::vector<KeyEntry> t;
        auto str = [&t](const char* sec, const char* key, std::string ExperimentConfig::* mem) {
            t.push_back({sec, key, [mem](const ExperimentConfig& c) { return c.*mem; },
                         [mem](ExperimentConfig& c, const std::string& v) { c.*mem = v; }});
        };
        auto dbl = [&t](const char* sec, const char* key, double ExperimentConfig::* mem) {
            t.push_back({sec, key, [mem](const ExperimentConfig& c) { return format_double(c.*mem); },
                         [mem, sec, key](ExperimentConfig& c, const std::string& v) {
                             c.*mem = parse_double(v, std::string(sec) + "." + key);
                         }});
        };
        auto int_ = [&t](const char* sec, const char* key, int ExperimentConfig::* mem) {
            t.push_back({sec, key, [mem](const ExperimentConfig& c) { return std::to_string(c.*mem); },
                         [mem, sec, key](ExperimentConfig& c, const std::string& v) {
                             c.*mem = static_cast<int>(parse_int(v, std::string(sec) + "." + key));
                         }});
        };
        auto u64 = [&t](const char* sec, const char* key, std::uint64_t ExperimentConfig::* mem) {
            t.push_back({sec, key, [mem](const ExperimentConfig& c) { return std::to_string(c.*mem); },
                         [mem, sec, key](ExperimentConfig& c, const std::string& v) {
                             c.*mem = static_cast<std::uint64_t>(parse_int(v, std::string(sec) + "." + key));
                         }});
        };
        auto list = [&t](const char* sec, const char* key, std::vector<double> ExperimentConfig::* mem) {
            t.push_back({sec, key, [mem](const ExperimentConfig& c) { return format_list(c.*mem); },
                         [mem, sec, key](ExperimentConfig& c, const std::string& v) {
                             c.*mem = parse_list(v, std::string(sec) + "." + key);
                         }});
        };

        str("experiment", "kind", &ExperimentConfig::kind);
        str("experiment", "potential", &ExperimentConfig::potential);
        str("experiment", "drift", &ExperimentConfig::drift);
        str("experiment", "schedule", &ExperimentConfig::schedule);
        str("experiment", "spatial", &ExperimentConfig::spatial);
        u64("experiment", "seed", &ExperimentConfig::seed);
        int_("experiment", "paths", &ExperimentConfig::paths);
        dbl("experiment", "theta", &ExperimentConfig::theta);
        dbl("experiment", "c_w", &ExperimentConfig::c_w);
        dbl("experiment", "fit_lo", &ExperimentConfig::fit_lo);
        dbl("experiment", "fit_hi", &ExperimentConfig::fit_hi);
        dbl("experiment", "tolerance", &ExperimentConfig::tolerance);
        int_("experiment", "workers", &ExperimentConfig::workers);
        str("experiment", "out", &ExperimentConfig::out);

        list("sim", "x0", &ExperimentConfig::x0);
        dbl("sim", "t_max", &ExperimentConfig::t_max);
        dbl("sim", "dt0", &ExperimentConfig::dt0);
        dbl("sim", "dt_growth", &ExperimentConfig::dt_growth);
        dbl("sim", "dt_cap", &ExperimentConfig::dt_cap);
        dbl("sim", "eta_stab", &ExperimentConfig::eta_stab);
        dbl("sim", "hessian_bound", &ExperimentConfig::hessian_bound);
        int_("sim", "checkpoints", &ExperimentConfig::checkpoints);
        dbl("sim", "tail_start", &ExperimentConfig::tail_start);

        str("rule", "enabled", &ExperimentConfig::rule_enabled);
        dbl("rule", "radius", &ExperimentConfig::rule_radius);
        dbl("rule", "rho", &ExperimentConfig::rule_rho);
        dbl("rule", "c", &ExperimentConfig::rule_c);
        dbl("rule", "c_beta", &ExperimentConfig::rule_c_beta);
        dbl("rule", "sigma", &ExperimentConfig::rule_sigma);
        dbl("rule", "ell", &ExperimentConfig::rule_ell);
        dbl("rule", "t0", &ExperimentConfig::rule_t0);

        list("counterexample", "decades", &ExperimentConfig::decades);
        dbl("counterexample", "radial_tol", &ExperimentConfig::radial_tol);
        dbl("counterexample", "min_radial_fraction", &ExperimentConfig::min_radial_fraction);
        dbl("counterexample", "min_winding", &ExperimentConfig::min_winding);

        list("oracle", "kappas", &ExperimentConfig::kappas);
        u64("oracle", "mc_paths", &ExperimentConfig::mc_paths);
        dbl("oracle", "mc_horizon", &ExperimentConfig::mc_horizon);
        dbl("oracle", "mc_dt", &ExperimentConfig::mc_dt);

        list("dropout", "t1", &ExperimentConfig::t1);
        return t;
    }();
    return table;
}

inline const KeyEntry* find_key(const std::string& section, const std::string& key) {
    for (const auto& e : key_table())
        if (e.section == section && e.key == key) return &e;
    return nullptr;
}

} // namespace detail

// ---------------------------------------------------------------------------
// INI-style parse / serialize. Grammar: `[section]` headers, `key = value`
// lines, `#` or `;` comments, blank lines ignored. Unknown keys are rejected.
// ---------------------------------------------------------------------------

inline ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        std::string s = line.substr(b, e - b + 1);
        if (s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            section = s.substr(1, s.size() - 2);
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        auto trim = [](std::string v) {
            const auto b2 = v.find_first_not_of(" \t");
            const auto e2 = v.find_last_not_of(" \t");
            return b2 == std::string::npos ? std::string() : v.substr(b2, e2 - b2 + 1);
        };
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (section.empty()) throw ConfigError("key '" + key + "' outside any section");
        const auto* entry = detail::find_key(section, key);
        if (entry == nullptr) throw ConfigError("unknown key '" + section + "." + key + "'");
        entry->set(cfg, value);
    }
    return cfg;
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
    std::string out;
    std::string current;
    for (const auto& e : detail::key_table()) {
        if (e.section != current) {
            if (!current.empty()) out += "\n";
            out += "[" + e.section + "]\n";
            current = e.section;
        }
        out += e.key + " = " + e.get(cfg) + "\n";
    }
    return out;
}

/// `--set section.key=value`
inline void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    const auto dot = path.find('.');
    if (dot == std::string::npos) throw ConfigError("override key '" + path + "' must be section.key");
    const auto* entry = detail::find_key(path.substr(0, dot), path.substr(dot + 1));
    if (entry == nullptr) throw ConfigError("unknown key '" + path + "'");
    entry->set(cfg, value);
}

// ---------------------------------------------------------------------------
// Resolution into runnable objects
// ---------------------------------------------------------------------------

inline StoppingRule parse_rule(const ExperimentConfig& cfg, double schedule_exponent) {
    StoppingRule rule;
    rule.region_radius = cfg.rule_radius;
    rule.rho = cfg.rule_rho;
    rule.C = cfg.rule_c;
    rule.c_beta = cfg.rule_c_beta;
    rule.sigma = cfg.rule_sigma >= 0.0 ? cfg.rule_sigma : schedule_exponent;
    rule.ell = cfg.rule_ell;
    rule.theta = cfg.theta;
    rule.t0 = cfg.rule_t0;
    std::stringstream ss(cfg.rule_enabled);
    std::string token;
    while (std::getline(ss, token, ',')) {
        const auto b = token.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        const auto e = token.find_last_not_of(" \t");
        token = token.substr(b, e - b + 1);
        if (token == "none") continue;
        else if (token == "exit") rule.enable_exit = true;
        else if (token == "alignment") rule.enable_alignment = true;
        else if (token == "drift_ratio") rule.enable_drift_ratio = true;
        else if (token == "gradient_bound") rule.enable_gradient_bound = true;
        else if (token == "beta_cap") rule.enable_beta_cap = true;
        else if (token == "trace_bound") rule.enable_trace_bound = true;
        else if (token == "lower_dropout") rule.enable_lower_dropout = true;
        else throw ConfigError("unknown rule clause '" + token + "'");
    }
    return rule;
}

/// Owns the potential; hands out EnsembleConfig views bound to it.
class ResolvedExperiment {
public:
    explicit ResolvedExperiment(const ExperimentConfig& cfg) : cfg_(cfg), potential_(make_potential(cfg.potential)) {
        static const char* kinds[] = {"rate", "simulate", "counterexample", "oracle-check", "dropout-check"};
        bool known = false;
        for (const char* k : kinds) known = known || cfg.kind == k;
        if (!known) throw ConfigError("unknown experiment kind '" + cfg.kind + "'");

        schedule_ = Schedule::parse(cfg.schedule);
        drift_mode_ = parse_drift_mode(cfg.drift);
        if (cfg.x0.size() != static_cast<std::size_t>(potential_.dimension))
            throw ConfigError("sim.x0 has dimension " + std::to_string(cfg.x0.size()) + " but potential '" +
                              cfg.potential + "' has dimension " + std::to_string(potential_.dimension));
        if (cfg.kind == "rate" || cfg.kind == "dropout-check") {
            if (schedule_.kind != Schedule::Kind::Polynomial && schedule_.kind != Schedule::Kind::Zero)
                throw ConfigError(cfg.kind + " experiments need a polynomial (or zero) schedule");
        }
        if ((cfg.kind == "rate" || cfg.kind == "counterexample" || cfg.kind == "dropout-check") && cfg.paths < 2)
            throw ConfigError("experiment.paths must be >= 2");
        if (cfg.spatial == "identity") spatial_ = SpatialFactor::Identity;
        else if (cfg.spatial == "mollifier") spatial_ = SpatialFactor::Mollifier;
        else if (cfg.spatial == "auto")
            spatial_ = drift_mode_ == DriftMode::RingCounterexample ? SpatialFactor::Mollifier
                                                                    : SpatialFactor::Identity;
        else throw ConfigError("unknown spatial factor '" + cfg.spatial + "'");
        rule_ = parse_rule(cfg, schedule_.kind == Schedule::Kind::Polynomial ? schedule_.exponent : 0.0);
    }

    ResolvedExperiment(const ResolvedExperiment&) = delete;
    ResolvedExperiment& operator=(const ResolvedExperiment&) = delete;

    const ExperimentConfig& config() const { return cfg_; }
    const Potential& potential() const { return potential_; }
    const Schedule& schedule() const { return schedule_; }
    const StoppingRule& rule() const { return rule_; }

    SimConfig sim_config() const {
        SimConfig sim;
        sim.x0 = cfg_.x0;
        sim.t_max = cfg_.t_max;
        sim.dt0 = cfg_.dt0;
        sim.dt_growth = cfg_.dt_growth;
        sim.dt_cap = cfg_.dt_cap;
        sim.eta_stab = cfg_.eta_stab;
        sim.hessian_bound = cfg_.hessian_bound;
        sim.master_seed = cfg_.seed;
        sim.checkpoint_count = cfg_.checkpoints;
        sim.tail_start = cfg_.tail_start;
        return sim;
    }

    EnsembleConfig ensemble_config() const {
        EnsembleConfig ens;
        ens.n_paths = cfg_.paths;
        ens.sim = sim_config();
        ens.drift = DriftSpec{drift_mode_, &potential_};
        ens.diffusivity = DiffusivitySpec{schedule_, spatial_};
        if (rule_.any_enabled()) ens.rule = rule_;
        ens.workers = cfg_.workers;
        return ens;
    }

    double fit_window_lo() const { return cfg_.fit_lo >= 0.0 ? cfg_.fit_lo : cfg_.t_max / 100.0; }
    double fit_window_hi() const { return cfg_.fit_hi >= 0.0 ? cfg_.fit_hi : cfg_.t_max; }

private:
    ExperimentConfig cfg_;
    Potential potential_;
    Schedule schedule_;
    DriftMode drift_mode_ = DriftMode::GradientFlow;
    SpatialFactor spatial_ = SpatialFactor::Identity;
    StoppingRule rule_;
};

} // namespace cooldown
