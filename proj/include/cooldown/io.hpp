#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cooldown/config.hpp"
#include "cooldown/estimates.hpp"
#include "cooldown/experiments.hpp"
#include "cooldown/monitors.hpp"

namespace cooldown {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// JSON value for a double; non-finite values map to null (the 0/0 -> infinity
/// convention is documented at the interface).
inline ordered_json json_num(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

} // namespace detail

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// CSV (comma separated, '.' decimal, header row, LF endings)
// ---------------------------------------------------------------------------

inline std::string moments_csv(const MomentCurve& curve) {
    std::string out = "t,mean,stderr,survival,n_alive\n";
    for (std::size_t i = 0; i < curve.t.size(); ++i) {
        out += detail::csv_num(curve.t[i]) + "," + detail::csv_num(curve.mean[i]) + "," +
               detail::csv_num(curve.stderr_[i]) + "," + detail::csv_num(curve.survival[i]) + "," +
               std::to_string(curve.n_alive[i]) + "\n";
    }
    return out;
}

inline MomentCurve parse_moments_csv(const std::string& text) {
    MomentCurve curve;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("moments csv: empty file");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 5) throw std::runtime_error("moments csv: malformed row '" + line + "'");
        curve.t.push_back(std::stod(cells[0]));
        curve.mean.push_back(std::stod(cells[1]));
        curve.stderr_.push_back(std::stod(cells[2]));
        curve.survival.push_back(std::stod(cells[3]));
        curve.n_alive.push_back(std::stoi(cells[4]));
    }
    return curve;
}

inline std::string trajectory_csv(const Trajectory& traj, int dimension) {
    std::string out = "t";
    for (int i = 1; i <= dimension; ++i) out += ",x_" + std::to_string(i);
    out += ",F,f_norm,I_val,I_noise,I_trace,I_wind,Phi\n";
    const bool planar = dimension == 2;
    for (const auto& cp : traj.checkpoints) {
        out += detail::csv_num(cp.t);
        for (double v : cp.x) out += "," + detail::csv_num(v);
        out += "," + detail::csv_num(cp.F) + "," + detail::csv_num(cp.grad_norm) + "," + detail::csv_num(cp.I_val) +
               "," + detail::csv_num(cp.I_noise) + "," + detail::csv_num(cp.I_trace);
        out += ",";
        if (planar) out += detail::csv_num(cp.I_wind);
        out += ",";
        if (planar) out += detail::csv_num(cp.phi);
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON reports (UTF-8, stable key order)
// ---------------------------------------------------------------------------

inline ordered_json event_report_json(const EventReport& rep) {
    ordered_json j;
    j["alignment_min"] = detail::json_num(rep.alignment_min);
    j["ratio_fa_min"] = detail::json_num(rep.ratio_fa_min);
    j["noise_energy"] = detail::json_num(rep.noise_energy);
    j["beta_max"] = detail::json_num(rep.beta_max);
    j["alpha_max"] = detail::json_num(rep.alpha_max);
    j["F_min"] = detail::json_num(rep.F_min);
    j["locality_sup"] = detail::json_num(rep.locality_sup);
    j["radius_max"] = detail::json_num(rep.radius_max);
    ordered_json d;
    d["triggered"] = rep.dropout.triggered;
    d["time"] = rep.dropout.triggered ? ordered_json(rep.dropout.time) : ordered_json(nullptr);
    d["clause"] = rep.dropout.triggered ? ordered_json(clause_name(rep.dropout.clause)) : ordered_json(nullptr);
    j["dropout"] = d;
    return j;
}

inline ordered_json estimate_json(const RateEstimate& est, double predicted, double tolerance, int n_paths,
                                  int n_failed, double survival_at_end) {
    ordered_json j;
    j["exponent"] = est.exponent;
    j["stderr"] = est.exponent_stderr;
    j["window"] = {{"lo", est.window_lo}, {"hi", est.window_hi}, {"points", est.n_points}};
    j["degenerate"] = est.degenerate;
    j["predicted_exponent"] = predicted;
    j["tolerance"] = tolerance;
    j["pass"] = std::abs(est.exponent - predicted) <= tolerance;
    j["n_paths"] = n_paths;
    j["n_failed"] = n_failed;
    j["survival_at_end"] = survival_at_end;
    return j;
}

inline ordered_json counterexample_json(const CounterexampleReport& rep) {
    ordered_json j;
    j["radial_fraction"] = rep.radial_fraction;
    j["radial_tol"] = rep.radial_tol;
    ordered_json winding = ordered_json::array();
    for (const auto& w : rep.winding) {
        ordered_json e;
        e["t_lo"] = w.t_lo;
        e["t_hi"] = w.t_hi;
        e["mean"] = w.mean;
        e["stderr"] = w.stderr_;
        winding.push_back(e);
    }
    j["winding_increments"] = winding;
    j["noise_energy_max"] = rep.noise_energy_max;
    j["noise_energy_cap"] = rep.noise_energy_cap;
    j["exit_fraction"] = rep.exit_fraction;
    j["n_failed"] = rep.n_failed;
    j["phi_t"] = rep.phi_t;
    j["phi_mean"] = rep.phi_mean;
    j["pass_radial"] = rep.pass_radial;
    j["pass_noise"] = rep.pass_noise;
    j["pass_winding"] = rep.pass_winding;
    j["pass"] = rep.pass;
    return j;
}

inline ordered_json dropout_report_json(const DropoutReport& rep) {
    ordered_json j;
    j["n_paths"] = rep.n_paths;
    j["n_failed"] = rep.n_failed;
    ordered_json probes = ordered_json::array();
    for (const auto& p : rep.probes) {
        ordered_json e;
        e["t1"] = p.t1;
        e["n_undershot"] = p.n_undershot;
        e["n_risen"] = p.n_risen;
        e["empirical"] = p.empirical;
        e["stderr"] = p.stderr_;
        e["bound_argument"] = p.bound_argument;
        e["bound"] = p.bound;
        e["pass"] = p.pass;
        probes.push_back(e);
    }
    j["probes"] = probes;
    j["pass"] = rep.pass;
    return j;
}

/// Full resolved configuration plus the seed; rerunning with this file as
/// --config reproduces the outputs byte for byte.
inline ordered_json manifest_json(const ExperimentConfig& cfg, const std::string& out_dir) {
    ordered_json j;
    j["tool"] = "cooldown_sde";
    j["format"] = 1;
    j["kind"] = cfg.kind;
    j["seed"] = cfg.seed;
    j["out_dir"] = out_dir;
    ordered_json sections;
    for (const auto& e : detail::key_table()) sections[e.section][e.key] = e.get(cfg);
    j["config"] = sections;
    return j;
}

inline ExperimentConfig config_from_manifest(const std::string& text) {
    const auto j = ordered_json::parse(text);
    if (!j.contains("config")) throw ConfigError("manifest has no 'config' object");
    ExperimentConfig cfg;
    for (const auto& [section, keys] : j.at("config").items()) {
        for (const auto& [key, value] : keys.items()) {
            const auto* entry = detail::find_key(section, key);
            if (entry == nullptr) throw ConfigError("unknown key '" + section + "." + key + "' in manifest");
            entry->set(cfg, value.get<std::string>());
        }
    }
    return cfg;
}

/// Loads a config from INI text or from a manifest.json produced by a run.
inline ExperimentConfig load_config_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    const auto b = text.find_first_not_of(" \t\r\n");
    if (b != std::string::npos && text[b] == '{') return config_from_manifest(text);
    return parse_config_text(text);
}

} // namespace cooldown
