#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <vector>

#include "cooldown/monitors.hpp"
#include "cooldown/sde_engine.hpp"
#include "support/radial_checks.hpp"

using namespace cooldown;

namespace {

const Potential kQuadratic = even_power_well(1, 1);
const Potential kQuartic = even_power_well(2, 1);
const Potential kRing = ring_potential();

DiffusivitySpec zero_noise() { return {Schedule::parse("zero"), SpatialFactor::Identity}; }

} // namespace

TEST_CASE("step_em basics", "[engine]") {
    const std::vector<double> noise{0.7};

    // zero drift, zero schedule: state unchanged
    {
        DriftSpec drift{DriftMode::Zero, &kQuadratic};
        const auto out = step_em(std::vector<double>{1.5}, 0.0, 0.1, drift, zero_noise(), noise);
        CHECK(out[0] == 1.5);
    }
    // gradient flow on |x|^2: 1 - 2*1*0.1 = 0.8
    {
        DriftSpec drift{DriftMode::GradientFlow, &kQuadratic};
        const auto out = step_em(std::vector<double>{1.0}, 0.0, 0.1, drift, zero_noise(), noise);
        CHECK(out[0] == Catch::Approx(0.8).margin(1e-15));
    }
    // ring drift at (2,0): -f = (-2, 0), ort * |r-1| = (0, 2); dt = 0 keeps the state
    {
        DriftSpec drift{DriftMode::RingCounterexample, &kRing};
        const std::vector<double> x{2.0, 0.0};
        const auto out = step_em(x, 0.0, 0.0, drift, zero_noise(), std::vector<double>{0.3, -0.9});
        CHECK(out[0] == 2.0);
        CHECK(out[1] == 0.0);

        std::vector<double> grad(2), alpha(2);
        kRing.gradient(x, grad);
        drift.eval(x, grad, alpha);
        CHECK(alpha[0] == Catch::Approx(-2.0).margin(1e-14));
        CHECK(alpha[1] == Catch::Approx(2.0).margin(1e-14));

        // drift against the finite-difference gradient
        const double h = 1e-6;
        const double fd0 = (kRing.value(std::vector<double>{2.0 + h, 0.0}) -
                            kRing.value(std::vector<double>{2.0 - h, 0.0})) /
                           (2.0 * h);
        CHECK(alpha[0] == Catch::Approx(-fd0 - 0.0).epsilon(1e-6));
    }
}

TEST_CASE("zero-noise gradient flow matches the exact solution", "[engine]") {
    SimConfig sim;
    sim.x0 = {1.0};
    sim.t_max = 5.0;
    DriftSpec drift{DriftMode::GradientFlow, &kQuadratic};
    const Trajectory traj = simulate(sim, drift, zero_noise(), kQuadratic);
    CHECK(std::abs(traj.final_state[0] - std::exp(-10.0)) < 1e-3);
    CHECK(traj.I_noise == 0.0);
    CHECK(traj.tail.beta_max == 0.0);
    // gradient flow keeps <f, alpha> = -|f|^2, so I_val <= 0
    CHECK(traj.I_val <= 0.0);
}

TEST_CASE("ring circle is stationary without noise", "[engine]") {
    SimConfig sim;
    sim.x0 = {1.0, 0.0};
    sim.t_max = 10.0;
    DriftSpec drift{DriftMode::RingCounterexample, &kRing};
    const Trajectory traj = simulate(sim, drift, zero_noise(), kRing);
    CHECK(traj.final_state[0] == 1.0);
    CHECK(traj.final_state[1] == 0.0);
    CHECK(traj.phi == 0.0);
    CHECK(traj.I_wind == 0.0);
}

TEST_CASE("noise energy stays below the analytic cap", "[engine]") {
    SimConfig sim;
    sim.x0 = {1.5, 0.0};
    sim.t_max = 1e3;
    sim.hessian_bound = 2.0;
    sim.master_seed = 42;
    DriftSpec drift{DriftMode::RingCounterexample, &kRing};
    DiffusivitySpec diff{Schedule::parse("poly:1:1"), SpatialFactor::Mollifier};
    const Trajectory traj = simulate(sim, drift, diff, kRing);
    CHECK(traj.I_noise <= 2.0);
    CHECK(traj.I_noise > 1.0); // most of int |beta|_F^2 accrues early
    CHECK(traj.annulus_exit_time > 0.0);
}

TEST_CASE("identical keys give bit-identical trajectories", "[engine]") {
    SimConfig sim;
    sim.x0 = {1.0};
    sim.t_max = 50.0;
    sim.master_seed = 7;
    sim.path_index = 3;
    DriftSpec drift{DriftMode::GradientFlow, &kQuartic};
    DiffusivitySpec diff{Schedule::parse("poly:1:1.2"), SpatialFactor::Identity};
    const Trajectory a = simulate(sim, drift, diff, kQuartic);
    const Trajectory b = simulate(sim, drift, diff, kQuartic);
    REQUIRE(a.checkpoints.size() == b.checkpoints.size());
    for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
        REQUIRE(std::memcmp(a.checkpoints[i].x.data(), b.checkpoints[i].x.data(), sizeof(double)) == 0);
        REQUIRE(a.checkpoints[i].I_val == b.checkpoints[i].I_val);
    }
    CHECK(a.final_state[0] == b.final_state[0]);

    // gradient flow keeps the value integrand -|f|^2 nonpositive, noise or not
    CHECK(a.I_val <= 0.0);

    // a different path index diverges
    sim.path_index = 4;
    const Trajectory c = simulate(sim, drift, diff, kQuartic);
    CHECK(c.final_state[0] != a.final_state[0]);
}

TEST_CASE("zero-noise step defect shrinks quadratically", "[engine]") {
    // F(x - f dt) - F(x) = -|f|^2 dt + O(dt^2); halving dt cuts the defect ~4x
    auto max_defect = [](double dt) {
        std::vector<double> x{1.0};
        DriftSpec drift{DriftMode::GradientFlow, &kQuartic};
        double worst = 0.0;
        double t = 0.0;
        const std::vector<double> noise{0.0};
        while (t < 1.0) {
            const double F0 = kQuartic.value(x);
            const double g = kQuartic.gradient_at(x)[0];
            const auto xn = step_em(x, t, dt, drift, zero_noise(), noise);
            const double defect = std::abs(kQuartic.value(xn) - F0 + g * g * dt);
            worst = std::max(worst, defect);
            x = xn;
            t += dt;
        }
        return worst;
    };
    const double d1 = max_defect(0.02);
    const double d2 = max_defect(0.01);
    CHECK(d2 <= d1 / 3.0);
}

TEST_CASE("checkpoint grid is strictly increasing and lands on markers", "[engine]") {
    SimConfig sim;
    sim.x0 = {1.0};
    sim.t_max = 100.0;
    sim.checkpoint_count = 16;
    sim.extra_checkpoints = {12.5, 25.0, 50.0};
    const auto times = sim.checkpoint_times();
    for (std::size_t i = 1; i < times.size(); ++i) REQUIRE(times[i] > times[i - 1]);

    DriftSpec drift{DriftMode::GradientFlow, &kQuartic};
    const Trajectory traj = simulate(sim, drift, zero_noise(), kQuartic);
    REQUIRE(traj.checkpoints.size() == times.size());
    bool saw = false;
    for (const auto& cp : traj.checkpoints)
        if (cp.t == 12.5) saw = true;
    CHECK(saw);
    // running integrals are monotone where they must be
    for (std::size_t i = 1; i < traj.checkpoints.size(); ++i) {
        REQUIRE(traj.checkpoints[i].I_noise >= traj.checkpoints[i - 1].I_noise);
        REQUIRE(traj.checkpoints[i].I_wind >= traj.checkpoints[i - 1].I_wind);
    }
}

TEST_CASE("engine failure modes", "[engine]") {
    SimConfig sim;
    sim.x0 = {3.0};
    sim.t_max = 10.0;
    sim.dt0 = 1.0;
    sim.dt_cap = 1.0;
    sim.eta_stab = 100.0;
    DriftSpec drift{DriftMode::GradientFlow, &kQuartic};
    CHECK_THROWS_AS(simulate(sim, drift, zero_noise(), kQuartic), NonFiniteStateError);

    SimConfig tiny;
    tiny.x0 = {1.0};
    tiny.t_max = 1.0;
    tiny.eta_stab = 1e-20;
    tiny.hessian_bound = 1.0;
    CHECK_THROWS_AS(simulate(tiny, drift, zero_noise(), kQuartic), StepUnderflowError);

    SimConfig ring_cfg;
    ring_cfg.x0 = {0.0, 0.0};
    ring_cfg.t_max = 1.0;
    DriftSpec ring_drift{DriftMode::RingCounterexample, &kRing};
    CHECK_THROWS_AS(simulate(ring_cfg, ring_drift, zero_noise(), kRing), std::invalid_argument);

    SimConfig wrong_d;
    wrong_d.x0 = {1.0};
    wrong_d.t_max = 1.0;
    CHECK_THROWS_AS(simulate(wrong_d, ring_drift, zero_noise(), kRing), std::invalid_argument);

    SimConfig no_step;
    no_step.x0 = {1.0};
    no_step.t_max = 1.0;
    no_step.dt0 = 0.0;
    CHECK_THROWS_AS(simulate(no_step, drift, zero_noise(), kQuartic), std::invalid_argument);
}

TEST_CASE("radial exact simulation: clock and increments", "[engine]") {
    // telescoped increment variances reproduce e^{-4s} g_s exactly
    const std::vector<double> grid{1.0, 2.0, 3.5, 5.0};
    double composed = 0.0, lo = 0.0;
    for (double hi : grid) {
        composed = composed * std::exp(-4.0 * (hi - lo)) + radial_increment_variance(lo, hi);
        lo = hi;
    }
    const double direct = std::exp(-4.0 * 5.0) * radial_clock(5.0);
    CHECK(composed == Catch::Approx(direct).epsilon(1e-10));

    // g_s ~ (1/4)(s+1)^{-2} e^{4s}: the ratio approaches 1 from above
    const double r8 = radial_clock(8.0) / (0.25 * std::pow(9.0, -2.0) * std::exp(32.0));
    const double r12 = radial_clock(12.0) / (0.25 * std::pow(13.0, -2.0) * std::exp(48.0));
    CHECK(r8 == Catch::Approx(1.0608).margin(0.005));
    CHECK(r12 < r8);
    CHECK(r12 > 1.0);

    CHECK_THROWS_AS(radial_clock(500.0), std::invalid_argument);
    CHECK(radial_increment_variance(490.0, 500.0) > 0.0); // overflow-free route
}

TEST_CASE("radial exact simulation: moments", "[engine]") {
    const int n = 4000;
    const std::vector<double> times{1.0, 2.0};
    double sum = 0.0, sum_sq = 0.0, sum_c = 0.0;
    for (int p = 0; p < n; ++p) {
        const auto path = simulate_radial_exact(0.0, 0.0, times, 11, static_cast<std::uint64_t>(p));
        sum += path.values[1];
        sum_sq += path.values[1] * path.values[1];
        // conditional run from z0 = 0.5 at t = 1
        const auto cond = simulate_radial_exact(1.0, 0.5, std::vector<double>{2.0}, 13, static_cast<std::uint64_t>(p));
        sum_c += cond.values[0];
    }
    const double mean = sum / n;
    const double var = (sum_sq - sum * sum / n) / (n - 1.0);
    const double var_th = std::exp(-8.0) * radial_clock(2.0);
    CHECK(std::abs(mean) <= 3.0 * std::sqrt(var / n));
    CHECK(std::abs(var - var_th) <= 3.0 * var_th * std::sqrt(2.0 / (n - 1.0)));

    const double mean_c = sum_c / n;
    const double var_c = std::exp(-8.0) * (radial_clock(2.0) - radial_clock(1.0));
    CHECK(std::abs(mean_c - 0.5 * std::exp(-2.0)) <= 3.0 * std::sqrt(var_c / n));

    CHECK_THROWS_AS(simulate_radial_exact(1.0, 0.0, std::vector<double>{0.5}, 1), std::invalid_argument);
}

TEST_CASE("planar radius agrees in law with the radial SDE", "[engine]") {
    // early noise is strong (sigma ~ 1), so a sizable share of paths leaves the
    // annulus before s = 1; the comparison conditions on staying inside
    const auto rows = testing::radial_consistency_check(2500, 2024, {1.0, 2.0, 5.0});
    for (const auto& a : rows) {
        INFO("s = " << a.s << " mean2d " << a.mean_2d << " mean1d " << a.mean_1d);
        REQUIRE(a.n_2d > 800);
        REQUIRE(a.n_1d > 800);
        CHECK(std::abs(a.mean_2d - a.mean_1d) <= 3.0 * a.se_mean);
        CHECK(std::abs(a.var_2d - a.var_1d) <= 3.0 * a.se_var);
    }
}

TEST_CASE("coupled OU comparison respects the 1/(2(t+1)) bound", "[engine]") {
    const auto rows = testing::radial_coupling_check(800, 515, {1.0, 5.0, 10.0});
    for (const auto& c : rows) {
        INFO("t = " << c.t << " mean " << c.mean_integral << " bound " << c.bound);
        CHECK(c.mean_integral <= c.bound + 3.0 * c.stderr_);
    }
}
