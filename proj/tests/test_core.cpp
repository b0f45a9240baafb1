// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>

#include "pfc/core.hpp"

using namespace pfc;

namespace {
constexpr double inf = std::numeric_limits<double>::infinity();
}

TEST_SUITE("core") {

TEST_CASE("quantities convert to angular rates and seconds once at the boundary") {
    CHECK(Quantity::parse("8.70GHz").si() == doctest::Approx(2 * M_PI * 8.70e9).epsilon(1e-15));
    CHECK(Quantity::parse("1.2MHz").si() == angular(1.2e6));
    CHECK(hertz(Quantity::parse("1.2MHz").si()) == doctest::Approx(1.2e6).epsilon(1e-15));
    CHECK(Quantity::parse("14.9us").si() == doctest::Approx(14.9e-6).epsilon(1e-15));
    CHECK(Quantity::parse("250ns").si() == doctest::Approx(250e-9).epsilon(1e-15));
    CHECK(Quantity::parse("90deg").si() == doctest::Approx(M_PI / 2).epsilon(1e-15));
    CHECK(Quantity::parse("-52dBm").si() == -52.0);
    CHECK(Quantity::parse("+3rad").si() == 3.0);
    CHECK(Quantity::parse("900e3").dimension() == Dimension::none);
    CHECK(Quantity::parse("900e3").si() == 900e3);
}

TEST_CASE("malformed quantities are rejected") {
    CHECK_THROWS_AS(Quantity::parse(""), ValidationError);
    CHECK_THROWS_AS(Quantity::parse("MHz"), ValidationError);
    CHECK_THROWS_AS(Quantity::parse("1.2furlongs"), ValidationError);
    CHECK_THROWS_AS(Quantity::parse("nanHz"), ValidationError);
}

TEST_CASE("quantity text round trips") {
    for (const char* s : {"8.7GHz", "0.6us", "-52dBm", "337.5deg", "10"}) {
        const auto q = Quantity::parse(s);
        CHECK(Quantity::parse(q.str()).si() == q.si());
    }
}

TEST_CASE("mode parameters from quality factors") {
    const auto m = ModeParams::from_q(angular(8.70e9), 900e3, 50e3);
    CHECK(hertz(m.gamma_total()) == doctest::Approx(183.7e3).epsilon(2e-3));
    CHECK(std::abs(m.gamma_total() - angular(170e3)) / angular(170e3) < 0.10);

    const auto lossless = ModeParams::from_q(angular(8.70e9), inf, inf);
    CHECK(lossless.gamma_int() == 0.0);
    CHECK(lossless.gamma_ext() == 0.0);
    CHECK(lossless.t1() == inf);

    CHECK_THROWS_AS(ModeParams::from_q(angular(8.70e9), 0.0, 50e3), ValidationError);
    CHECK_THROWS_AS(ModeParams::from_q(angular(8.70e9), -1.0, 50e3), ValidationError);
    CHECK_THROWS_AS(ModeParams::from_q(-1.0, 1e5, 1e5), ValidationError);
}

TEST_CASE("quality factors round trip") {
    for (double q : {1e3, 5e4, 9e5, 3.3e7}) {
        const auto m = ModeParams::from_q(angular(9.33e9), q, 2 * q);
        CHECK(std::abs(m.q_int() - q) / q < 1e-12);
        CHECK(std::abs(m.q_ext() - 2 * q) / (2 * q) < 1e-12);
    }
}

TEST_CASE("storage mode from its energy decay time") {
    const auto b = ModeParams::from_t1(angular(9.33e9), 14.9e-6);
    CHECK(b.gamma_int() == doctest::Approx(1.0 / 14.9e-6).epsilon(1e-14));
    CHECK(hertz(b.gamma_int()) == doctest::Approx(10.68e3).epsilon(1e-3));
    CHECK(b.gamma_ext() == 0.0);
    CHECK(b.t1() == doctest::Approx(14.9e-6).epsilon(1e-14));
    CHECK_THROWS_AS(ModeParams::from_t1(angular(9.33e9), 0.0), ValidationError);
    CHECK_THROWS_AS(ModeParams::from_t1(angular(9.33e9), 1e-6, 2e6), ValidationError);
}

TEST_CASE("pump detuning") {
    const auto a = ModeParams(angular(8.70e9), 0, 0);
    const auto b = ModeParams(angular(9.33e9), 0, 0);
    PumpDrive p{angular(632.5e6), 0.0, Envelope::constant(1.0)};
    CHECK(detuning(p, a, b) == doctest::Approx(angular(2.5e6)).epsilon(1e-6));
    p.omega_p = std::abs(a.omega() - b.omega());
    CHECK(detuning(p, a, b) == 0.0);
    p.omega_p = pump_frequency_for(angular(1e6), a, b);
    CHECK(detuning(p, a, b) == doctest::Approx(angular(1e6)).epsilon(1e-9));
    // Symmetric in the mode order.
    CHECK(detuning(p, b, a) == detuning(p, a, b));
}

TEST_CASE("coupler state wraps flux into one period") {
    const CouplerState s(1.25, 0.2, -0.1);
    CHECK(s.phi_dc() == doctest::Approx(0.25));
    CHECK(s.phi_offset() == doctest::Approx(0.9));
    CHECK(wrap_flux(-0.25) == doctest::Approx(0.75));
    CHECK(wrap_flux(3.0) == 0.0);
    CHECK_THROWS_AS(CouplerState(0.0, -0.1), ValidationError);
    CHECK_THROWS_AS(wrap_flux(std::nan("")), ValidationError);
    CHECK(s.with_delta_phi(0.4).delta_phi() == 0.4);
}

TEST_CASE("pulse envelopes") {
    const auto e = Envelope::pulse(1.0, 3.0, 2.0);
    CHECK(e(0.5) == 0.0);
    CHECK(e(2.0) == 2.0);
    CHECK(e(3.5) == 0.0);
    CHECK(e.peak() == 2.0);

    const auto r = Envelope::pulse(0.0, 4.0, 1.0, 1.0);
    CHECK(r(0.5) == doctest::Approx(0.5));
    CHECK(r(2.0) == 1.0);
    CHECK(r(3.5) == doctest::Approx(0.5));

    CHECK_THROWS_AS(Envelope::pulse(1.0, 1.0, 1.0), ValidationError);
    CHECK_THROWS_AS(Envelope::pulse(0.0, 1.0, -1.0), ValidationError);
    CHECK_THROWS_AS(Envelope::pulse(0.0, 1.0, 1.0, 0.6), ValidationError);
    CHECK_THROWS_AS(Envelope({{0.0, 2.0, 1.0}, {1.0, 3.0, 1.0}}), ValidationError);

    const Envelope two({{2.0, 3.0, 1.0}, {0.0, 1.0, 0.5}});
    CHECK(two(0.5) == 0.5);
    CHECK(two(1.5) == 0.0);
    CHECK(two(2.5) == 1.0);
    CHECK(Envelope::constant(0.3)(-1e9) == 0.3);
}

TEST_CASE("amplitude pairs count photons") {
    const Amplitudes x{{3.0, 4.0}, {0.0, 1.0}, 0.0};
    CHECK(x.energy() == doctest::Approx(26.0));
}

}
