#pragma once

#include <algorithm>

#include "cooldown/sde_engine.hpp"

namespace cooldown {

// ---------------------------------------------------------------------------
// Finite-horizon proxies for the asymptotic events
// ---------------------------------------------------------------------------

/// Tail-window statistics of a completed trajectory. Ratios follow the
/// 0/0 -> +infinity convention.
struct EventReport {
    double alignment_min = kInf;
    double ratio_fa_min = kInf;
    double noise_energy = 0.0; // total int |beta|_F^2 ds
    double beta_max = 0.0;
    double alpha_max = 0.0;
    double F_min = kInf;
    double locality_sup = -kInf;
    double radius_max = 0.0;
    DropoutRecord dropout;
};

/// Running maximum over checkpoints of
/// int_0^t (<f(X_s), alpha_s> + 1/2 tr(beta^T H beta)) ds.
/// Finite limsup of this functional is the staying-local criterion.
inline double locality_functional(const Trajectory& traj) {
    double sup = -kInf;
    for (const auto& cp : traj.checkpoints) sup = std::max(sup, cp.I_val + cp.I_trace);
    if (traj.checkpoints.empty()) sup = traj.I_val + traj.I_trace;
    return sup;
}

inline EventReport event_report(const Trajectory& traj) {
    EventReport rep;
    rep.alignment_min = traj.tail.alignment_min;
    rep.ratio_fa_min = traj.tail.ratio_fa_min;
    rep.noise_energy = traj.I_noise;
    rep.beta_max = traj.tail.beta_max;
    rep.alpha_max = traj.tail.alpha_max;
    rep.F_min = traj.tail.F_min;
    rep.locality_sup = locality_functional(traj);
    rep.radius_max = traj.tail.radius_max;
    rep.dropout = traj.dropout;
    return rep;
}

} // namespace cooldown
