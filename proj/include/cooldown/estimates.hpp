#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "cooldown/math.hpp"

namespace cooldown {

// ---------------------------------------------------------------------------
// Power-law rate fitting shared by the oracle and experiment paths
// ---------------------------------------------------------------------------

/// Per-checkpoint restricted means with survival bookkeeping.
struct MomentCurve {
    std::vector<double> t;
    std::vector<double> mean;
    std::vector<double> stderr_;
    std::vector<double> survival;
    std::vector<int> n_alive;
};

struct RateEstimate {
    double exponent = 0.0;
    double exponent_stderr = 0.0;
    double window_lo = 0.0;
    double window_hi = 0.0;
    std::size_t n_points = 0;
    bool degenerate = false; // power-law fit flagged unreliable (non-power decay)
};

struct NonPositiveMomentError : std::runtime_error {
    std::size_t checkpoint_index;
    explicit NonPositiveMomentError(std::size_t idx)
        : std::runtime_error("fit_rate: non-positive moment at checkpoint " + std::to_string(idx)),
          checkpoint_index(idx) {}
};

/// OLS of log(mean) on log(t+1) over checkpoints with window_lo <= t <= window_hi.
/// The negated slope is the decay exponent.
inline RateEstimate fit_rate(const MomentCurve& curve, double window_lo, double window_hi) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < curve.t.size(); ++i) {
        if (curve.t[i] < window_lo || curve.t[i] > window_hi) continue;
        if (!(curve.mean[i] > 0.0)) throw NonPositiveMomentError(i);
        xs.push_back(std::log(curve.t[i] + 1.0));
        ys.push_back(std::log(curve.mean[i]));
    }
    if (xs.size() < 8) throw std::invalid_argument("fit_rate: need at least 8 checkpoints in the window");
    const LinearFit fit = linear_fit(xs, ys);
    RateEstimate est;
    est.exponent = -fit.slope;
    est.exponent_stderr = fit.slope_stderr;
    est.window_lo = window_lo;
    est.window_hi = window_hi;
    est.n_points = xs.size();

    // A power law has the same local slope on both halves of the log window;
    // exponential decay does not. Flag fits whose halves disagree badly.
    const std::size_t n = xs.size();
    if (n >= 8) {
        const std::size_t half = n / 2;
        const LinearFit first = linear_fit(std::span(xs).subspan(0, half), std::span(ys).subspan(0, half));
        const LinearFit second = linear_fit(std::span(xs).subspan(half), std::span(ys).subspan(half));
        const double scale = std::max({std::abs(first.slope), std::abs(second.slope), 1e-12});
        if (std::abs(first.slope - second.slope) > 0.25 * scale) est.degenerate = true;
    }
    return est;
}

} // namespace cooldown
