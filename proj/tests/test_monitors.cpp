#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cooldown/io.hpp"
#include "cooldown/monitors.hpp"
#include "cooldown/sde_engine.hpp"

using namespace cooldown;

namespace {

const Potential kQuadratic = even_power_well(1, 1);
const Potential kQuartic = even_power_well(2, 1);
const Potential kRing = ring_potential();

StoppingRule all_clauses() {
    StoppingRule r;
    r.enable_exit = r.enable_alignment = r.enable_drift_ratio = r.enable_gradient_bound = r.enable_beta_cap =
        r.enable_trace_bound = r.enable_lower_dropout = true;
    return r;
}

} // namespace

TEST_CASE("check_rule clause logic", "[monitors]") {
    StoppingRule rule;
    rule.enable_exit = true;
    rule.region_radius = 3.0;

    // outside the ball: exit clause fires
    const std::vector<double> far{4.0};
    std::vector<double> g(1), a(1);
    kQuartic.gradient(far, g);
    a[0] = -g[0];
    auto clause = check_rule(rule, far, 1.0, a, 0.0, kQuartic);
    REQUIRE(clause.has_value());
    CHECK(*clause == Clause::ExitRegion);

    // before t0 nothing fires
    rule.t0 = 5.0;
    CHECK_FALSE(check_rule(rule, far, 1.0, a, 0.0, kQuartic).has_value());
    rule.t0 = 0.0;

    // gradient flow alignment ratio is exactly 1: rho = 0.5 never fires
    StoppingRule align;
    align.enable_alignment = true;
    align.rho = 0.5;
    const std::vector<double> x{0.7};
    kQuartic.gradient(x, g);
    a[0] = -g[0];
    CHECK_FALSE(check_rule(align, x, 1.0, a, 0.0, kQuartic).has_value());
    // at a critical point 0/0 counts as infinity: still inert
    const std::vector<double> origin{0.0};
    kQuartic.gradient(origin, g);
    a[0] = 0.0;
    CHECK_FALSE(check_rule(align, origin, 1.0, a, 0.0, kQuartic).has_value());

    // beta cap against a dominated schedule: (t+1)^{-2} < (t+1)^{-1.5} for all
    // t > 0, so the clause (which uses >=) stays silent after the start
    StoppingRule cap;
    cap.enable_beta_cap = true;
    cap.c_beta = 1.0;
    cap.sigma = 1.5;
    const Schedule sched = Schedule::parse("poly:1:2");
    for (double t : {0.5, 1.0, 10.0, 1e3}) {
        CHECK_FALSE(check_rule(cap, x, t, a, sched.eval(t), kQuartic).has_value());
    }
}

TEST_CASE("clause order is fixed and disabled clauses are inert", "[monitors]") {
    // craft a state violating exit and gradient bound together
    StoppingRule rule = all_clauses();
    rule.region_radius = 1.0;
    rule.C = 0.5;
    rule.rho = 2.0; // also trips alignment (< 2 |f|^2 ... ratio is 1)
    const std::vector<double> x{2.0};
    std::vector<double> g(1), a(1);
    kQuartic.gradient(x, g);
    a[0] = -g[0];
    auto clause = check_rule(rule, x, 1.0, a, 0.0, kQuartic);
    REQUIRE(clause.has_value());
    CHECK(*clause == Clause::ExitRegion); // first in the fixed order

    rule.enable_exit = false;
    clause = check_rule(rule, x, 1.0, a, 0.0, kQuartic);
    REQUIRE(clause.has_value());
    CHECK(*clause == Clause::Alignment);

    rule.enable_alignment = false;
    clause = check_rule(rule, x, 1.0, a, 0.0, kQuartic);
    REQUIRE(clause.has_value());
    CHECK(*clause == Clause::DriftRatio); // |alpha| = |f| > 0.5 |f|

    rule.enable_drift_ratio = false;
    clause = check_rule(rule, x, 1.0, a, 0.0, kQuartic);
    REQUIRE(clause.has_value());
    CHECK(*clause == Clause::GradientBound); // |f| = 32 > C
}

TEST_CASE("alignment clause is inert for gradient flow along whole runs", "[monitors]") {
    StoppingRule rule;
    rule.enable_alignment = true;
    rule.rho = 0.999;
    SimConfig sim;
    sim.x0 = {1.0};
    sim.t_max = 200.0;
    sim.master_seed = 5;
    DriftSpec drift{DriftMode::GradientFlow, &kQuartic};
    DiffusivitySpec diff{Schedule::parse("poly:1:1.2"), SpatialFactor::Identity};
    const Trajectory traj = simulate(sim, drift, diff, kQuartic, &rule);
    CHECK_FALSE(traj.dropout.triggered);
    CHECK(traj.tail.alignment_min == 1.0);
}

TEST_CASE("lower dropout barrier", "[monitors]") {
    // start below the level: F - ell < -(t+1)^{-2} soon after t0
    StoppingRule rule;
    rule.enable_lower_dropout = true;
    rule.ell = 2.0 / 3.0; // the ring's top level
    rule.theta = 0.75;
    SimConfig sim;
    sim.x0 = {0.15, 0.0};
    sim.t_max = 50.0;
    DriftSpec drift{DriftMode::RingCounterexample, &kRing};
    DiffusivitySpec diff{Schedule::parse("zero"), SpatialFactor::Identity};
    const Trajectory traj = simulate(sim, drift, diff, kRing, &rule);
    REQUIRE(traj.dropout.triggered);
    CHECK(traj.dropout.clause == Clause::LowerDropout);
    CHECK(traj.dropout.time >= rule.t0);
    // checkpoints after the trigger are marked dropped
    bool saw_dead = false;
    for (const auto& cp : traj.checkpoints)
        if (!cp.alive) saw_dead = true;
    CHECK(saw_dead);
}

TEST_CASE("locality functional on converging and diverging runs", "[monitors]") {
    // zero noise, gradient flow: integrand is -|f|^2 <= 0, so the running max
    // sits at the first checkpoint
    {
        SimConfig sim;
        sim.x0 = {0.5};
        sim.t_max = 100.0;
        DriftSpec drift{DriftMode::GradientFlow, &kQuartic};
        DiffusivitySpec diff{Schedule::parse("zero"), SpatialFactor::Identity};
        const Trajectory traj = simulate(sim, drift, diff, kQuartic);
        const double sup = locality_functional(traj);
        CHECK(sup == traj.checkpoints.front().I_val + traj.checkpoints.front().I_trace);
        CHECK(sup <= 0.0);
        CHECK(sup > -0.2);
    }
    // zero drift, poly(1,1) noise, |H| <= 2: functional <= (h d / 2) int sigma^2 = 1
    {
        SimConfig sim;
        sim.x0 = {0.0};
        sim.t_max = 1000.0;
        sim.master_seed = 9;
        DriftSpec drift{DriftMode::Zero, &kQuadratic};
        DiffusivitySpec diff{Schedule::parse("poly:1:1"), SpatialFactor::Identity};
        const Trajectory traj = simulate(sim, drift, diff, kQuadratic);
        const double sup = locality_functional(traj);
        CHECK(sup <= 1.01);
        CHECK(sup > 0.9);
    }
    // diverging control: constant noise on the quadratic well grows linearly
    {
        SimConfig sim;
        sim.x0 = {0.0};
        sim.t_max = 200.0;
        sim.master_seed = 9;
        DriftSpec drift{DriftMode::Zero, &kQuadratic};
        DiffusivitySpec diff{Schedule::parse("const:0.3"), SpatialFactor::Identity};
        const Trajectory traj = simulate(sim, drift, diff, kQuadratic);
        double at_half = 0.0, at_end = 0.0;
        for (const auto& cp : traj.checkpoints) {
            if (cp.t <= 100.0) at_half = std::max(at_half, cp.I_val + cp.I_trace);
            at_end = std::max(at_end, cp.I_val + cp.I_trace);
        }
        CHECK(at_end - at_half > 1.0); // 0.09 per unit time
    }
}

TEST_CASE("locality functional is stable under step refinement", "[monitors]") {
    auto run = [](double dt0, double growth, double cap) {
        SimConfig sim;
        sim.x0 = {0.5};
        sim.t_max = 50.0;
        sim.dt0 = dt0;
        sim.dt_growth = growth;
        sim.dt_cap = cap;
        DriftSpec drift{DriftMode::GradientFlow, &kQuartic};
        DiffusivitySpec diff{Schedule::parse("zero"), SpatialFactor::Identity};
        return locality_functional(simulate(sim, drift, diff, kQuartic));
    };
    const double coarse = run(2e-4, 2e-5, 0.02);
    const double fine = run(1e-4, 1e-5, 0.01);
    CHECK(std::abs(coarse - fine) < 1e-3 * (1.0 + std::abs(coarse)));
}

TEST_CASE("event report fields", "[monitors]") {
    // gradient flow: alignment proxy is exactly 1
    {
        SimConfig sim;
        sim.x0 = {1.0};
        sim.t_max = 100.0;
        sim.master_seed = 3;
        DriftSpec drift{DriftMode::GradientFlow, &kQuartic};
        DiffusivitySpec diff{Schedule::parse("poly:1:1.2"), SpatialFactor::Identity};
        const EventReport rep = event_report(simulate(sim, drift, diff, kQuartic));
        CHECK(rep.alignment_min == 1.0);
        CHECK(rep.beta_max > 0.0);
        CHECK(rep.F_min >= 0.0);
        CHECK_FALSE(rep.dropout.triggered);
    }
    // ring drift: |f|/|alpha| = 2/sqrt(4 + r^2) >= 2/5 inside the working region
    {
        SimConfig sim;
        sim.x0 = {1.3, 0.0};
        sim.t_max = 20.0;
        sim.master_seed = 4;
        sim.hessian_bound = 2.0;
        DriftSpec drift{DriftMode::RingCounterexample, &kRing};
        DiffusivitySpec diff{Schedule::parse("poly:1:1"), SpatialFactor::Mollifier};
        const EventReport rep = event_report(simulate(sim, drift, diff, kRing));
        CHECK(rep.ratio_fa_min >= 0.4);
        CHECK(rep.radius_max < 3.0);
    }
    // zero noise: no noise energy, no beta
    {
        SimConfig sim;
        sim.x0 = {1.0};
        sim.t_max = 10.0;
        DriftSpec drift{DriftMode::GradientFlow, &kQuadratic};
        const EventReport rep =
            event_report(simulate(sim, drift, DiffusivitySpec{Schedule::parse("zero"), SpatialFactor::Identity},
                                  kQuadratic));
        CHECK(rep.noise_energy == 0.0);
        CHECK(rep.beta_max == 0.0);
    }
}

TEST_CASE("event report serializes with documented keys", "[monitors]") {
    SimConfig sim;
    sim.x0 = {0.0}; // critical point: gradient flow stays put, ratios are 0/0 -> infinity
    sim.t_max = 10.0;
    DriftSpec drift{DriftMode::GradientFlow, &kQuartic};
    const EventReport rep =
        event_report(simulate(sim, drift, DiffusivitySpec{Schedule::parse("zero"), SpatialFactor::Identity},
                              kQuartic));
    CHECK(rep.alignment_min == kInf);
    const ordered_json j = event_report_json(rep);
    for (const char* key : {"alignment_min", "ratio_fa_min", "noise_energy", "beta_max", "alpha_max", "F_min",
                            "locality_sup", "radius_max", "dropout"})
        REQUIRE(j.contains(key));
    CHECK(j["alignment_min"].is_null()); // +infinity maps to null
    CHECK(j["dropout"]["triggered"] == false);
}
