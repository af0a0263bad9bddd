#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cooldown/math.hpp"

namespace cooldown {

// ---------------------------------------------------------------------------
// Regions and Lojasiewicz certificates
// ---------------------------------------------------------------------------

/// Ball (r_inner = 0) or annulus around a center point, radius measured from
/// the origin of the certificate. r_outer may be infinite.
struct Region {
    std::vector<double> center;
    double r_inner = 0.0;
    double r_outer = kInf;

    bool contains(std::span<const double> y) const {
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double d = y[i] - center[i];
            s += d * d;
        }
        const double r = std::sqrt(s);
        return r >= r_inner && r <= r_outer;
    }
};

/// Concrete claim |f(y)| >= constant * |F(y) - level|^theta on the region.
struct LojaCertificate {
    double theta = 0.5;   // in [1/2, 1)
    double constant = 0.0; // > 0
    Region region;
};

struct CriticalLevel {
    double level = 0.0;
    std::vector<std::vector<double>> points; // representative critical points
    LojaCertificate certificate;
};

// ---------------------------------------------------------------------------
// Potential: a C^2 Lyapunov landscape with exact derivatives
// ---------------------------------------------------------------------------

struct Potential {
    std::string id;
    int dimension = 0;
    std::function<double(std::span<const double>)> value;
    // writes d components
    std::function<void(std::span<const double>, std::span<double>)> gradient;
    // writes d*d entries, row-major, symmetric
    std::function<void(std::span<const double>, std::span<double>)> hessian;
    std::function<double(std::span<const double>)> hessian_trace;
    std::vector<CriticalLevel> critical_levels;

    std::vector<double> gradient_at(std::span<const double> x) const {
        std::vector<double> g(static_cast<std::size_t>(dimension));
        gradient(x, g);
        return g;
    }

    std::vector<double> hessian_at(std::span<const double> x) const {
        std::vector<double> h(static_cast<std::size_t>(dimension) * static_cast<std::size_t>(dimension));
        hessian(x, h);
        return h;
    }
};

// ---------------------------------------------------------------------------
// ort and the radial mollifier of the counterexample
// ---------------------------------------------------------------------------

/// (x1, x2) -> (-x2, x1); rotates a planar vector by +pi/2.
inline std::array<double, 2> ort(std::span<const double> x) {
    if (x.size() != 2) throw std::invalid_argument("ort: requires dimension 2");
    return {-x[1], x[0]};
}

namespace detail {

/// Quintic smoothstep: C^2 at both endpoints.
inline double smoothstep(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

} // namespace detail

/// Radial profile of the counterexample's bump: 0 on [0, 1/2], rises C^2 to 1
/// on [1/2, 2/3], equals 1 on [2/3, 2], falls C^2 to 0 on [2, 3], 0 beyond.
inline double mollifier_radial(double r) {
    if (r <= 0.5 || r >= 3.0) return 0.0;
    if (r < 2.0 / 3.0) return detail::smoothstep((r - 0.5) / (2.0 / 3.0 - 0.5));
    if (r <= 2.0) return 1.0;
    return 1.0 - detail::smoothstep(r - 2.0);
}

inline double mollifier(std::span<const double> x) {
    if (x.size() != 2) throw std::invalid_argument("mollifier: requires dimension 2");
    return mollifier_radial(norm(x));
}

// ---------------------------------------------------------------------------
// Catalog entry: |x|^{2p}
// ---------------------------------------------------------------------------

/// F(x) = |x|^{2p}. Gradient 2p|x|^{2p-2} x; the Lojasiewicz inequality holds
/// globally with theta = 1 - 1/(2p) and constant 2p, with equality everywhere.
inline Potential even_power_well(int p, int d) {
    if (p < 1 || d < 1) throw std::invalid_argument("even_power_well: need p >= 1 and d >= 1");
    Potential pot;
    pot.id = "even_power:" + std::to_string(p) + ":" + std::to_string(d);
    pot.dimension = d;
    const double pd = static_cast<double>(p);
    pot.value = [pd](std::span<const double> x) { return std::pow(norm_sq(x), pd); };
    pot.gradient = [pd](std::span<const double> x, std::span<double> g) {
        const double s = norm_sq(x);
        const double c = (pd == 1.0) ? 2.0 : 2.0 * pd * std::pow(s, pd - 1.0);
        for (std::size_t i = 0; i < x.size(); ++i) g[i] = c * x[i];
    };
    pot.hessian = [pd, d](std::span<const double> x, std::span<double> h) {
        const double s = norm_sq(x);
        const std::size_t n = static_cast<std::size_t>(d);
        double c1, c2;
        if (pd == 1.0) {
            c1 = 2.0;
            c2 = 0.0;
        } else if (s == 0.0) {
            c1 = 0.0;
            c2 = 0.0;
        } else {
            c1 = 2.0 * pd * std::pow(s, pd - 1.0);
            c2 = 4.0 * pd * (pd - 1.0) * std::pow(s, pd - 2.0);
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) h[i * n + j] = c2 * x[i] * x[j] + (i == j ? c1 : 0.0);
    };
    pot.hessian_trace = [pd, d](std::span<const double> x) {
        const double s = norm_sq(x);
        if (pd == 1.0) return 2.0 * d;
        if (s == 0.0) return 0.0;
        return 2.0 * pd * std::pow(s, pd - 1.0) * (d + 2.0 * (pd - 1.0));
    };
    CriticalLevel origin;
    origin.level = 0.0;
    origin.points.push_back(std::vector<double>(static_cast<std::size_t>(d), 0.0));
    origin.certificate.theta = 1.0 - 1.0 / (2.0 * pd);
    origin.certificate.constant = 2.0 * pd;
    origin.certificate.region = Region{std::vector<double>(static_cast<std::size_t>(d), 0.0), 0.0, kInf};
    pot.critical_levels.push_back(std::move(origin));
    return pot;
}

// ---------------------------------------------------------------------------
// Catalog entry: the rotationally invariant ring landscape
// ---------------------------------------------------------------------------

namespace detail {

// psi(r): (1-r)^2 for r >= 1/2, else 8/3 r^3 - 3 r^2 + 2/3. C^2 across r=1/2.
inline double ring_psi(double r) {
    if (r >= 0.5) {
        const double u = 1.0 - r;
        return u * u;
    }
    return (8.0 / 3.0) * r * r * r - 3.0 * r * r + 2.0 / 3.0;
}

inline double ring_dpsi(double r) { return (r >= 0.5) ? 2.0 * (r - 1.0) : 8.0 * r * r - 6.0 * r; }

inline double ring_ddpsi(double r) { return (r >= 0.5) ? 2.0 : 16.0 * r - 6.0; }

// psi'(r)/r, finite at r = 0 (equals 8r - 6 on the inner branch).
inline double ring_q(double r) { return (r >= 0.5) ? 2.0 * (r - 1.0) / r : 8.0 * r - 6.0; }

} // namespace detail

/// Scans |f| / |F - level|^theta over the radial section of a region of the
/// ring landscape and returns 90% of the minimum. A valid constant exists
/// since both critical sets are nondegenerate; this pins a concrete one.
inline double ring_certificate_scan(double level, double theta, double r_lo, double r_hi, int n = 4096) {
    double best = kInf;
    for (int i = 0; i <= n; ++i) {
        const double r = r_lo + (r_hi - r_lo) * i / n;
        const double gap = std::abs(detail::ring_psi(r) - level);
        if (gap < 1e-14) continue; // at the critical radius the ratio is 0/0
        const double ratio = std::abs(detail::ring_dpsi(r)) / std::pow(gap, theta);
        if (ratio < best) best = ratio;
    }
    return 0.9 * best;
}

/// F(x) = psi(|x|) on R^2: a local maximum of height 2/3 at the origin and a
/// circle of minima at |x| = 1.
inline Potential ring_potential() {
    Potential pot;
    pot.id = "ring";
    pot.dimension = 2;
    pot.value = [](std::span<const double> x) { return detail::ring_psi(norm(x)); };
    pot.gradient = [](std::span<const double> x, std::span<double> g) {
        const double r = norm(x);
        const double q = detail::ring_q(r);
        g[0] = q * x[0];
        g[1] = q * x[1];
    };
    pot.hessian = [](std::span<const double> x, std::span<double> h) {
        const double r = norm(x);
        const double q = detail::ring_q(r);
        if (r < 1e-14) {
            h[0] = q;
            h[1] = 0.0;
            h[2] = 0.0;
            h[3] = q;
            return;
        }
        const double c = (detail::ring_ddpsi(r) - q) / (r * r);
        h[0] = q + c * x[0] * x[0];
        h[1] = c * x[0] * x[1];
        h[2] = c * x[1] * x[0];
        h[3] = q + c * x[1] * x[1];
    };
    pot.hessian_trace = [](std::span<const double> x) {
        const double r = norm(x);
        return detail::ring_q(r) + detail::ring_ddpsi(r);
    };

    CriticalLevel top;
    top.level = 2.0 / 3.0;
    top.points.push_back({0.0, 0.0});
    top.certificate.theta = 0.5;
    top.certificate.constant = ring_certificate_scan(2.0 / 3.0, 0.5, 0.0, 0.3);
    top.certificate.region = Region{{0.0, 0.0}, 0.0, 0.3};

    CriticalLevel circle;
    circle.level = 0.0;
    circle.points.push_back({1.0, 0.0});
    circle.certificate.theta = 0.5;
    circle.certificate.constant = ring_certificate_scan(0.0, 0.5, 0.9, 1.1);
    circle.certificate.region = Region{{0.0, 0.0}, 0.9, 1.1};

    pot.critical_levels.push_back(std::move(top));
    pot.critical_levels.push_back(std::move(circle));
    return pot;
}

// ---------------------------------------------------------------------------
// Certificate residual
// ---------------------------------------------------------------------------

/// |f(y)| - constant * |F(y) - level|^theta. Nonnegative (up to roundoff)
/// wherever the certificate is valid.
inline double loja_residual(const Potential& pot, const CriticalLevel& level, std::span<const double> y) {
    if (!level.certificate.region.contains(y))
        throw std::domain_error("loja_residual: point outside certificate region");
    std::vector<double> g(static_cast<std::size_t>(pot.dimension));
    pot.gradient(y, g);
    const double gap = std::abs(pot.value(y) - level.level);
    return norm(g) - level.certificate.constant * std::pow(gap, level.certificate.theta);
}

// ---------------------------------------------------------------------------
// Catalog lookup: "even_power:p:d" and "ring"
// ---------------------------------------------------------------------------

inline Potential make_potential(const std::string& id) {
    if (id == "ring") return ring_potential();
    const std::string prefix = "even_power:";
    if (id.rfind(prefix, 0) == 0) {
        const std::string rest = id.substr(prefix.size());
        const auto colon = rest.find(':');
        if (colon != std::string::npos) {
            try {
                std::size_t used1 = 0, used2 = 0;
                const std::string ps = rest.substr(0, colon), ds = rest.substr(colon + 1);
                const int p = std::stoi(ps, &used1);
                const int d = std::stoi(ds, &used2);
                if (used1 == ps.size() && used2 == ds.size()) return even_power_well(p, d);
            } catch (const std::exception&) {
                // fall through to the catalog error below
            }
        }
    }
    throw std::invalid_argument("unknown potential id: '" + id + "'");
}

} // namespace cooldown
