#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cooldown/math.hpp"
#include "cooldown/schedules.hpp"

using namespace cooldown;

TEST_CASE("schedule evaluation", "[schedules]") {
    CHECK(Schedule::parse("poly:1:1").eval(0.0) == 1.0);
    CHECK(Schedule::parse("poly:1:2").eval(9.0) == Catch::Approx(0.01).margin(1e-15));
    CHECK(Schedule::parse("log:2").eval(std::exp(1.0) - 1.0) == Catch::Approx(2.0).margin(1e-12));
    CHECK(Schedule::parse("const:0.3").eval(7.0) == 0.3);
    CHECK(Schedule::parse("zero").eval(5.0) == 0.0);

    CHECK_THROWS_AS(Schedule::parse("poly:1:1").eval(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(Schedule::parse("log:1").eval(0.5), std::invalid_argument); // below t_min
}

TEST_CASE("schedule parsing round trips and rejects junk", "[schedules]") {
    for (const char* spec : {"poly:1:1.2", "poly:0.5:2.5", "log:2", "const:0.25", "zero"}) {
        const Schedule s = Schedule::parse(spec);
        const Schedule s2 = Schedule::parse(s.to_string());
        CHECK(s2.kind == s.kind);
        CHECK(s2.eval(3.0) == s.eval(3.0));
    }
    CHECK_THROWS_AS(Schedule::parse("poly:1"), std::invalid_argument);
    CHECK_THROWS_AS(Schedule::parse("poly:1:x"), std::invalid_argument);
    CHECK_THROWS_AS(Schedule::parse("warm:1"), std::invalid_argument);
}

TEST_CASE("squared tail integral", "[schedules]") {
    CHECK(Schedule::parse("poly:1:1").squared_tail_integral(0.0) == Catch::Approx(1.0).margin(1e-15));
    CHECK(Schedule::parse("poly:2:1").squared_tail_integral(1.0) == Catch::Approx(2.0).margin(1e-14));
    CHECK(Schedule::parse("log:1").squared_tail_integral(1.0) == kInf);
    CHECK(Schedule::parse("poly:1:0.5").squared_tail_integral(0.0) == kInf);
    CHECK(Schedule::parse("const:0.2").squared_tail_integral(0.0) == kInf);
    CHECK(Schedule::parse("zero").squared_tail_integral(0.0) == 0.0);

    // agreement with numerical quadrature on finite cases: exponent > 1 decays
    // fast enough for the semi-infinite transform; for slower decay compare
    // tail differences over a finite interval
    for (const char* spec : {"poly:1:1", "poly:2:1", "poly:0.7:1.4"}) {
        const Schedule s = Schedule::parse(spec);
        for (double t : {0.0, 1.0, 10.0}) {
            const auto q = integrate_to_infinity(
                [&s](double u) {
                    const double v = s.eval(u);
                    return v * v;
                },
                t, 1e-12);
            REQUIRE(q.converged);
            REQUIRE(std::abs(q.value - s.squared_tail_integral(t)) <= 1e-8 * s.squared_tail_integral(t));
        }
    }
    {
        const Schedule s = Schedule::parse("poly:1.3:0.8");
        const double t = 1.0, T = 1e5;
        const auto q = integrate(
            [&s](double u) {
                const double v = s.eval(u);
                return v * v;
            },
            t, T, 1e-12);
        REQUIRE(q.converged);
        const double expected = s.squared_tail_integral(t) - s.squared_tail_integral(T);
        REQUIRE(std::abs(q.value - expected) <= 1e-8 * expected);
    }
}

TEST_CASE("phi_R comparison function", "[schedules]") {
    EnvelopeParams p;
    p.R = 1.0;
    p.eta = 1.0;
    p.theta = 0.75;
    CHECK(phi_R(p, 0.0) == 1.0);
    CHECK(phi_R(p, 2.0) == Catch::Approx(0.25).margin(1e-15)); // (0.5*2 + 1)^{-2}

    // ODE residual: Phi' = -eta Phi^{2 theta}
    for (double t : {1.0, 10.0, 100.0}) {
        const double h = 1e-4 * (1.0 + t);
        const double deriv = (phi_R(p, t + h) - phi_R(p, t - h)) / (2.0 * h);
        const double rhs = -p.eta * std::pow(phi_R(p, t), 2.0 * p.theta);
        REQUIRE(std::abs(deriv - rhs) <= 1e-6 * std::abs(rhs));
    }

    // strictly decreasing and positive
    double prev = kInf;
    for (double t = 0.0; t <= 50.0; t += 0.5) {
        const double v = phi_R(p, t);
        REQUIRE(v > 0.0);
        REQUIRE(v < prev);
        prev = v;
    }
}

TEST_CASE("predicted exponent", "[schedules]") {
    CHECK(predicted_exponent(0.75, 2.0) == 2.0);
    CHECK(predicted_exponent(0.75, 0.9) == Catch::Approx(1.2).margin(1e-14));
    CHECK(predicted_exponent(0.6, 3.0) == Catch::Approx(5.0).margin(1e-12));
    CHECK_THROWS_AS(predicted_exponent(0.5, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(predicted_exponent(1.0, 1.0), std::invalid_argument);

    // monotone nondecreasing in sigma, capped at 1/(2 theta - 1)
    double prev = 0.0;
    for (double s = 0.0; s <= 6.0; s += 0.25) {
        const double e = predicted_exponent(0.75, s);
        REQUIRE(e >= prev);
        REQUIRE(e <= 2.0 + 1e-15);
        prev = e;
    }
}

TEST_CASE("envelope validation", "[schedules]") {
    auto grid = log_spaced(1e-2, 1e4, 512);
    grid.insert(grid.begin(), 0.0);

    // theta = 3/4, v = (t+1)^{-2}, kappa1 = 2 against sigma = (t+1)^{-2}, kappa2 = 1
    {
        EnvelopeParams p;
        p.theta = 0.75;
        p.v_exponent = 2.0;
        p.kappa1 = 2.0;
        p.kappa2 = 1.0;
        const auto rep = validate_envelope(p, Schedule::parse("poly:1:2"), grid);
        CHECK(rep.ok);
    }
    // noise-limited canonical choice: sigma = 1.2 -> v = (t+1)^{-1.6}, kappa1 = 1.6, kappa2 = 1
    {
        const EnvelopeParams p = canonical_envelope(0.75, 1.2);
        CHECK(p.v_exponent == Catch::Approx(1.6).margin(1e-14));
        CHECK(p.kappa1 == Catch::Approx(1.6).margin(1e-14));
        const auto rep = validate_envelope(p, Schedule::parse("poly:1:1.2"), grid);
        CHECK(rep.ok);
    }
    // deterministic-limited canonical choice: sigma = 2 -> v = (t+1)^{-2}
    {
        const EnvelopeParams p = canonical_envelope(0.75, 2.0);
        CHECK(p.v_exponent == 2.0);
        const auto rep = validate_envelope(p, Schedule::parse("poly:1:2"), grid);
        CHECK(rep.ok);
    }
    // zero schedule: the noise-side inequality holds trivially
    {
        EnvelopeParams p = canonical_envelope(0.75, 2.0);
        const auto rep = validate_envelope(p, Schedule::parse("zero"), grid);
        CHECK(rep.ok);
        CHECK(rep.max_noise_violation <= 0.0);
    }
    // a broken envelope is reported, not thrown
    {
        EnvelopeParams p = canonical_envelope(0.75, 1.2);
        p.kappa2 = 0.1; // too small against sigma = (t+1)^{-1.2}
        const auto rep = validate_envelope(p, Schedule::parse("poly:1:1.2"), grid);
        CHECK_FALSE(rep.ok);
        CHECK(rep.max_noise_violation > 0.0);
    }
    CHECK_THROWS_AS(validate_envelope(EnvelopeParams{}, Schedule::parse("zero"), std::vector<double>{}),
                    std::invalid_argument);
}

TEST_CASE("envelope constant search satisfies the strict inequality", "[schedules]") {
    const double rho = 0.5, L = 4.0, theta = 0.75, c_w = 1.0, k1 = 2.0, k2 = 1.0;
    const auto [alpha, eta] = find_envelope_constants(rho, L, theta, c_w, k1, k2);
    CHECK(alpha > 0.0);
    CHECK(eta > 0.0);
    const double lhs_coeff = rho * L * L * std::pow(2.0, -(2.0 * theta - 1.0));
    const double b_coeff = (rho * L * L * std::pow(c_w, 2.0 * theta) + k2 + k1 * alpha) / std::pow(alpha, 2.0 * theta);
    for (double a = 0.01; a < 30.0; a *= 2.3)
        for (double b = 0.01; b < 30.0; b *= 2.3) {
            const double lhs = lhs_coeff * std::pow(a + b, 2.0 * theta);
            const double rhs = eta * std::pow(a, 2.0 * theta) + b_coeff * std::pow(b, 2.0 * theta);
            REQUIRE(lhs > rhs);
        }
}
