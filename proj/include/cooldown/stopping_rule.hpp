#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cooldown/math.hpp"
#include "cooldown/potentials.hpp"

namespace cooldown {

// ---------------------------------------------------------------------------
// Discretized stopping rules (the stopping times T and T_{rho,C,t0,K})
// ---------------------------------------------------------------------------

enum class Clause {
    ExitRegion,     // X_t leaves the ball K
    Alignment,      // <f(X_t), -alpha_t> < rho |f(X_t)|^2
    DriftRatio,     // |alpha_t| > C |f(X_t)|
    GradientBound,  // |f(X_t)| > C
    DiffusivityCap, // |beta_t| >= C_beta (t+1)^{-sigma}
    TraceBound,     // 1/2 tr(beta^T H beta) > C (C_beta (t+1)^{-sigma})^2
    LowerDropout,   // F(X_t) - ell < -(t+1)^{-1/(2 theta - 1)}
};

inline const char* clause_name(Clause c) {
    switch (c) {
        case Clause::ExitRegion: return "exit";
        case Clause::Alignment: return "alignment";
        case Clause::DriftRatio: return "drift_ratio";
        case Clause::GradientBound: return "gradient_bound";
        case Clause::DiffusivityCap: return "beta_cap";
        case Clause::TraceBound: return "trace_bound";
        case Clause::LowerDropout: return "lower_dropout";
    }
    return "?";
}

struct StoppingRule {
    // clause enable mask, one flag per clause in the fixed evaluation order
    bool enable_exit = false;
    bool enable_alignment = false;
    bool enable_drift_ratio = false;
    bool enable_gradient_bound = false;
    bool enable_beta_cap = false;
    bool enable_trace_bound = false;
    bool enable_lower_dropout = false;

    double region_radius = 3.0; // K = closed ball of this radius at the origin
    double rho = 0.5;
    double C = 100.0;
    double c_beta = 1.0;
    double sigma = 1.0;  // reference decay: r_t = c_beta (t+1)^{-sigma}
    double ell = 0.0;    // critical level for the lower-dropout barrier
    double theta = 0.75; // barrier w_t = (t+1)^{-1/(2 theta - 1)}
    double t0 = 0.0;     // clauses are inert before t0

    double barrier(double t) const { return std::pow(t + 1.0, -1.0 / (2.0 * theta - 1.0)); }

    bool any_enabled() const {
        return enable_exit || enable_alignment || enable_drift_ratio || enable_gradient_bound || enable_beta_cap ||
               enable_trace_bound || enable_lower_dropout;
    }
};

struct DropoutRecord {
    bool triggered = false;
    double time = 0.0;
    Clause clause = Clause::ExitRegion;
    std::vector<double> state;
};

/// Clause check with every input precomputed (the engine calls this once per
/// accepted step). beta is the scalar diffusivity magnitude sigma_t phi(X_t),
/// trace_term is 1/2 tr(beta^T H beta) = 1/2 beta^2 tr H(X_t).
inline std::optional<Clause> check_rule_values(const StoppingRule& rule, std::span<const double> state, double t,
                                               std::span<const double> alpha, std::span<const double> grad, double F,
                                               double beta, double trace_term) {
    if (t < rule.t0) return std::nullopt;
    if (rule.enable_exit && norm(state) > rule.region_radius) return Clause::ExitRegion;
    if (rule.enable_alignment) {
        // 0/0 counts as +infinity, so a vanishing gradient never trips this.
        const double fa = -dot(grad, alpha);
        const double g2 = norm_sq(grad);
        if (fa < rule.rho * g2) return Clause::Alignment;
    }
    if (rule.enable_drift_ratio && norm(alpha) > rule.C * norm(grad)) return Clause::DriftRatio;
    if (rule.enable_gradient_bound && norm(grad) > rule.C) return Clause::GradientBound;
    const double r_t = rule.c_beta * std::pow(t + 1.0, -rule.sigma);
    if (rule.enable_beta_cap && beta >= r_t) return Clause::DiffusivityCap;
    if (rule.enable_trace_bound && trace_term > rule.C * r_t * r_t) return Clause::TraceBound;
    if (rule.enable_lower_dropout && F - rule.ell < -rule.barrier(t)) return Clause::LowerDropout;
    return std::nullopt;
}

/// Convenience form computing gradient and value from the potential.
inline std::optional<Clause> check_rule(const StoppingRule& rule, std::span<const double> state, double t,
                                        std::span<const double> alpha, double beta, const Potential& pot) {
    std::vector<double> g(static_cast<std::size_t>(pot.dimension));
    pot.gradient(state, g);
    const double F = pot.value(state);
    const double trace_term = 0.5 * beta * beta * pot.hessian_trace(state);
    return check_rule_values(rule, state, t, alpha, g, F, beta, trace_term);
}

} // namespace cooldown
