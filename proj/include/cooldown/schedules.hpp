#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cooldown/math.hpp"

namespace cooldown {

// ---------------------------------------------------------------------------
// Deterministic cooling laws sigma_t
// ---------------------------------------------------------------------------

struct Schedule {
    enum class Kind { Polynomial, Logarithmic, Constant, Zero };

    Kind kind = Kind::Zero;
    double scale = 1.0;    // C in C (t+1)^{-exponent}
    double exponent = 1.0; // decay exponent of the polynomial kind
    double level = 0.0;    // constant kind
    double c = 1.0;        // logarithmic kind: sqrt(2c / log(t+1))
    double t_min = 1.0;    // logarithmic kind is evaluated from t_min on

    double eval(double t) const {
        if (t < 0.0) throw std::invalid_argument("Schedule::eval: t must be >= 0");
        switch (kind) {
            case Kind::Polynomial: return scale * std::pow(t + 1.0, -exponent);
            case Kind::Logarithmic:
                if (t < t_min) throw std::invalid_argument("Schedule::eval: logarithmic kind needs t >= t_min");
                return std::sqrt(2.0 * c / std::log(t + 1.0));
            case Kind::Constant: return level;
            case Kind::Zero: return 0.0;
        }
        return 0.0;
    }

    /// int_t^inf sigma_u^2 du, analytic. Infinite for the logarithmic kind and
    /// for nonzero constants; finite for polynomial kinds iff exponent > 1/2.
    double squared_tail_integral(double t) const {
        if (t < 0.0) throw std::invalid_argument("Schedule::squared_tail_integral: t must be >= 0");
        switch (kind) {
            case Kind::Polynomial: {
                if (exponent <= 0.5) return kInf;
                const double e = 2.0 * exponent - 1.0;
                return scale * scale * std::pow(t + 1.0, -e) / e;
            }
            case Kind::Logarithmic: return kInf;
            case Kind::Constant: return level == 0.0 ? 0.0 : kInf;
            case Kind::Zero: return 0.0;
        }
        return 0.0;
    }

    std::string to_string() const {
        switch (kind) {
            case Kind::Polynomial: return "poly:" + format_num(scale) + ":" + format_num(exponent);
            case Kind::Logarithmic: return "log:" + format_num(c);
            case Kind::Constant: return "const:" + format_num(level);
            case Kind::Zero: return "zero";
        }
        return "zero";
    }

    static Schedule parse(const std::string& spec) {
        auto split = [](const std::string& s) {
            std::vector<std::string> parts;
            std::size_t start = 0;
            while (true) {
                const auto pos = s.find(':', start);
                if (pos == std::string::npos) {
                    parts.push_back(s.substr(start));
                    break;
                }
                parts.push_back(s.substr(start, pos - start));
                start = pos + 1;
            }
            return parts;
        };
        auto num = [&spec](const std::string& s) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(s, &used);
            } catch (const std::exception&) {
                throw std::invalid_argument("bad schedule spec: '" + spec + "'");
            }
            if (used != s.size()) throw std::invalid_argument("bad schedule spec: '" + spec + "'");
            return v;
        };
        const auto parts = split(spec);
        Schedule s;
        if (parts[0] == "zero" && parts.size() == 1) {
            s.kind = Kind::Zero;
        } else if (parts[0] == "poly" && parts.size() == 3) {
            s.kind = Kind::Polynomial;
            s.scale = num(parts[1]);
            s.exponent = num(parts[2]);
        } else if (parts[0] == "log" && parts.size() == 2) {
            s.kind = Kind::Logarithmic;
            s.c = num(parts[1]);
        } else if (parts[0] == "const" && parts.size() == 2) {
            s.kind = Kind::Constant;
            s.level = num(parts[1]);
        } else {
            throw std::invalid_argument("bad schedule spec: '" + spec + "'");
        }
        return s;
    }

private:
    static std::string format_num(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }
};

// ---------------------------------------------------------------------------
// Envelope functions v_t, w_t and the comparison solution Phi_t^{(R)}
// ---------------------------------------------------------------------------

struct EnvelopeParams {
    double theta = 0.75;     // in (1/2, 1)
    double v_scale = 1.0;    // v_t = v_scale (t+1)^{-v_exponent}
    double v_exponent = 2.0;
    double c_w = 0.0;        // w_t = c_w * v_t
    double kappa1 = 2.0;
    double kappa2 = 1.0;
    double eta = 1.0;
    double alpha = 1.0;
    double R = 1.0;
    double rho = 1.0;

    double v(double t) const { return v_scale * std::pow(t + 1.0, -v_exponent); }
    double w(double t) const { return c_w * v(t); }
    /// -v'(t)/v(t), analytic for the power-law family.
    double decay_ratio(double t) const { return v_exponent / (t + 1.0); }
};

/// Phi_t^{(R)} = R ((2 theta - 1) eta R^{2 theta - 1} t + 1)^{-1/(2 theta - 1)};
/// solves Phi' = -eta Phi^{2 theta} with Phi_0 = R.
inline double phi_R(const EnvelopeParams& p, double t) {
    if (t < 0.0) throw std::invalid_argument("phi_R: t must be >= 0");
    const double tm = 2.0 * p.theta - 1.0;
    return p.R * std::pow(tm * p.eta * std::pow(p.R, tm) * t + 1.0, -1.0 / tm);
}

/// min(sigma/theta, 1/(2 theta - 1)): the decay exponent of the
/// survival-restricted moment bound for a (t+1)^{-sigma} cooling law.
inline double predicted_exponent(double theta, double sigma) {
    if (!(theta > 0.5 && theta < 1.0)) throw std::invalid_argument("predicted_exponent: theta must be in (1/2, 1)");
    if (sigma < 0.0) throw std::invalid_argument("predicted_exponent: sigma must be >= 0");
    return std::min(sigma / theta, 1.0 / (2.0 * theta - 1.0));
}

struct EnvelopeReport {
    double max_decay_violation = 0.0; // max over grid of -v'/v - kappa1 v^{2 theta - 1}
    double max_noise_violation = 0.0; // max over grid of sigma_t^2 - kappa2 v^{2 theta}
    bool ok = false;
};

/// Checks the two envelope inequalities on a time grid.
inline EnvelopeReport validate_envelope(const EnvelopeParams& p, const Schedule& s, std::span<const double> grid,
                                        double tol = 1e-9) {
    if (grid.empty()) throw std::invalid_argument("validate_envelope: empty grid");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("validate_envelope: grid must be increasing");
    EnvelopeReport rep;
    for (double t : grid) {
        const double vt = p.v(t);
        const double lhs1 = p.decay_ratio(t) - p.kappa1 * std::pow(vt, 2.0 * p.theta - 1.0);
        const double lhs2 = s.eval(t) * s.eval(t) - p.kappa2 * std::pow(vt, 2.0 * p.theta);
        rep.max_decay_violation = std::max(rep.max_decay_violation, lhs1);
        rep.max_noise_violation = std::max(rep.max_noise_violation, lhs2);
    }
    rep.ok = rep.max_decay_violation <= tol && rep.max_noise_violation <= tol;
    return rep;
}

/// Canonical envelope for sigma_t = C (t+1)^{-sigma}: v decays at
/// 1/(2 theta - 1) when sigma >= theta/(2 theta - 1), else at sigma/theta.
inline EnvelopeParams canonical_envelope(double theta, double sigma, double schedule_scale = 1.0) {
    if (!(theta > 0.5 && theta < 1.0)) throw std::invalid_argument("canonical_envelope: theta must be in (1/2, 1)");
    EnvelopeParams p;
    p.theta = theta;
    const double deterministic = 1.0 / (2.0 * theta - 1.0);
    p.v_exponent = (sigma >= theta * deterministic) ? deterministic : sigma / theta;
    p.v_scale = 1.0;
    p.kappa1 = p.v_exponent;
    p.kappa2 = schedule_scale * schedule_scale;
    return p;
}

/// Searches alpha, eta > 0 with
///   rho L^2 2^{-(2 theta - 1)} (a+b)^{2 theta}
///     > eta a^{2 theta} + (rho L^2 c_w^{2 theta} + kappa2 + kappa1 alpha)/alpha^{2 theta} b^{2 theta}
/// for all a, b > 0. Since (a+b)^{2 theta} >= a^{2 theta} + b^{2 theta}, it is
/// enough to push both coefficients strictly below rho L^2 2^{-(2 theta - 1)}.
inline std::pair<double, double> find_envelope_constants(double rho, double loja_constant, double theta, double c_w,
                                                         double kappa1, double kappa2) {
    const double lhs_coeff = rho * loja_constant * loja_constant * std::pow(2.0, -(2.0 * theta - 1.0));
    const double numerator_base = rho * std::pow(loja_constant, 2.0) * std::pow(c_w, 2.0 * theta) + kappa2;
    double alpha = std::max(1.0, c_w);
    for (int it = 0; it < 400; ++it) {
        const double coeff = (numerator_base + kappa1 * alpha) / std::pow(alpha, 2.0 * theta);
        if (coeff < 0.5 * lhs_coeff) return {alpha, 0.5 * lhs_coeff};
        alpha *= 2.0;
    }
    throw std::runtime_error("find_envelope_constants: search failed");
}

} // namespace cooldown
