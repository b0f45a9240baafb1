// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "pfc/flux.hpp"

using namespace pfc;

TEST_SUITE("flux") {

TEST_CASE("coupler model without pull is flat") {
    const auto c = FluxCurve::coupler_model(angular(8.7e9), 0.0, angular(7.7e9));
    for (double phi : {0.0, 0.1, 0.25, 0.5, 0.77})
        CHECK(c.omega_at(phi) == angular(8.7e9));
    for (double phi : {0.0, 0.1, 0.25, 0.77})
        CHECK(c.slope_at(phi) == 0.0);
}

TEST_CASE("coupler model at half a flux quantum") {
    const double wb = angular(8.7e9);
    const double kappa = 1e36;
    const auto c = FluxCurve::coupler_model(wb, kappa, angular(7.7e9));
    CHECK(c.omega_at(0.5) == doctest::Approx(wb + kappa / (wb * wb)).epsilon(1e-15));
    CHECK(c.omega_at(0.3) == doctest::Approx(oracle::coupler_model(wb, kappa, angular(7.7e9), 0.0, 0.3)).epsilon(1e-14));
}

TEST_CASE("coupler model rejects a coupler above the cavity") {
    CHECK_THROWS_AS(FluxCurve::coupler_model(angular(7e9), 1e30, angular(7.7e9)), ValidationError);
    CHECK_THROWS_AS(FluxCurve::coupler_model(-1.0, 1e30, angular(7.7e9)), ValidationError);
}

TEST_CASE("default calibration reproduces its targets") {
    const FluxCalibrationTargets t;
    const auto m = calibrate_flux_model(angular(8.70e9), angular(9.33e9), t);
    // Modulation is monotone on [0, 0.5]; check with the model written out.
    const auto& a = m.curve_a;
    const double w0 = oracle::coupler_model(a.omega_bare(), a.kappa_pull(), a.omega_c_max(), a.phi_offset(), 0.0);
    const double wh = oracle::coupler_model(a.omega_bare(), a.kappa_pull(), a.omega_c_max(), a.phi_offset(), 0.5);
    CHECK(std::abs(wh - w0) == doctest::Approx(angular(4e6)).epsilon(1e-6));
    // The calibrated bias is at the operating frequencies' steepest joint slope.
    const auto g = coupling_rate(m.curve_a, m.curve_b, m.coupler.with_delta_phi(0.2));
    CHECK(g.g_p == doctest::Approx(angular(1.2e6)).epsilon(1e-6));
    CHECK_FALSE(g.degenerate);
    for (double d : {-0.01, 0.01}) {
        const auto shifted = CouplerState(m.coupler.phi_dc() + d, 0.2, m.coupler.phi_offset());
        CHECK(coupling_rate(m.curve_a, m.curve_b, shifted).g_p <= g.g_p);
    }
    CHECK(m.power_calib == doctest::Approx(0.2 / std::sqrt(std::pow(10.0, -5.2))).epsilon(1e-12));
    CHECK(m.coupling_at_power(-52.0).g_p == doctest::Approx(angular(1.2e6)).epsilon(1e-6));
}

TEST_CASE("slopes agree with central differences") {
    const auto m = calibrate_flux_model(angular(8.70e9), angular(9.33e9));
    const double h = 1e-6;
    auto fd = [&](const FluxCurve& c, double phi) { return (c.omega_at(phi + h) - c.omega_at(phi - h)) / (2 * h); };
    CHECK(m.curve_a.slope_at(0.25) == doctest::Approx(fd(m.curve_a, 0.25)).epsilon(1e-6));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.02, 0.48);
    for (int i = 0; i < 100; ++i) {
        const double phi = u(rng) + (i % 2 ? 0.5 : 0.0);
        for (const auto* c : {&m.curve_a, &m.curve_b}) {
            const double s = c->slope_at(phi);
            CHECK(std::abs(s - fd(*c, phi)) <= 1e-6 * std::abs(s));
        }
    }
}

TEST_CASE("slope vanishes at modulation extrema") {
    const auto c = FluxCurve::coupler_model(angular(8.7e9), 1e36, angular(7.7e9));
    CHECK(c.slope_at(0.0) == doctest::Approx(0.0).epsilon(1e-30));
    auto tab = [] {
        std::vector<FluxCurve::Sample> s;
        for (int i = 0; i < 16; ++i)
            s.push_back({i / 16.0, angular(8.7e9) + angular(2e6) * std::cos(2 * M_PI * i / 16.0)});
        return FluxCurve::tabulated(s);
    }();
    CHECK(std::abs(tab.slope_at(0.0)) < 1e-6 * angular(2e6));
    CHECK(std::abs(tab.slope_at(0.5)) < 1e-6 * angular(2e6));
}

TEST_CASE("curves are periodic in one flux quantum") {
    const auto m = calibrate_flux_model(angular(8.70e9), angular(9.33e9));
    std::vector<FluxCurve::Sample> s;
    for (int i = 0; i < 12; ++i)
        s.push_back({i / 12.0, m.curve_a.omega_at(i / 12.0)});
    const auto tab = FluxCurve::tabulated(s);
    for (double phi : {0.013, 0.25, 0.61, 0.97}) {
        for (const auto* c : {&m.curve_a, &tab}) {
            const double w = c->omega_at(phi);
            CHECK(std::abs(c->omega_at(phi + 1.0) - w) <= 1e-12 * w);
            CHECK(std::abs(c->omega_at(phi - 3.0) - w) <= 1e-12 * w);
        }
    }
}

TEST_CASE("tabulated curves interpolate through their samples") {
    std::vector<FluxCurve::Sample> s;
    for (int i = 0; i < 24; ++i)
        s.push_back({i / 24.0, angular(9.33e9) + angular(3e6) * std::sin(2 * M_PI * i / 24.0)});
    const auto tab = FluxCurve::tabulated(s);
    for (const auto& p : s)
        CHECK(tab.omega_at(p.phi) == doctest::Approx(p.omega).epsilon(1e-13));
    // A smooth periodic function is reproduced closely between samples.
    CHECK(tab.omega_at(0.3) == doctest::Approx(angular(9.33e9) + angular(3e6) * std::sin(0.6 * M_PI)).epsilon(1e-8));
    CHECK(tab.kind() == FluxCurve::Kind::tabulated);
}

TEST_CASE("tabulated curves are validated") {
    CHECK_THROWS_AS(FluxCurve::tabulated({{0, 1}, {0.1, 1}, {0.2, 1}}), ValidationError);
    CHECK_THROWS_AS(FluxCurve::tabulated({{0, 1}, {0.2, 1}, {0.1, 1}, {0.3, 1}}), ValidationError);
    CHECK_THROWS_AS(FluxCurve::tabulated({{0, 1}, {0.1, 1}, {0.2, 1}, {1.3, 1}}), ValidationError);
}

TEST_CASE("flux tables parse with header and comments") {
    const auto tab = FluxCurve::parse_table("phi,freq_hz\n# measured\n0,9.33e9\n0.25,9.331e9\n0.5,9.332e9\n0.75,9.331e9\n");
    CHECK(tab.omega_at(0.25) == doctest::Approx(angular(9.331e9)).epsilon(1e-14));
    CHECK_THROWS_AS(FluxCurve::parse_table("0,1\n0.25\n0.5,1\n0.75,1\n"), ParseError);
    CHECK_THROWS_AS(FluxCurve::load_table("/nonexistent/table.csv"), ValidationError);
}

TEST_CASE("coupling rate from the slope product") {
    const auto m = calibrate_flux_model(angular(8.70e9), angular(9.33e9));
    CHECK(coupling_rate(m.curve_a, m.curve_b, m.coupler.with_delta_phi(0.0)).g_p == 0.0);

    // Identical curves: g = d * |slope| / 4 exactly.
    const auto c = FluxCurve::coupler_model(angular(8.7e9), 1e36, angular(7.7e9));
    const CouplerState st(0.3, 0.17);
    const double s = c.slope_at(0.3);
    const double g = coupling_rate(c, c, st).g_p;
    CHECK(std::abs(g - 0.17 * std::abs(s) / 4) <= 1e-12 * g);

    // Linear in the pump flux amplitude, exactly.
    for (double d : {0.05, 0.1, 0.2, 0.3}) {
        const double g1 = coupling_rate(m.curve_a, m.curve_b, m.coupler.with_delta_phi(d)).g_p;
        const double g2 = coupling_rate(m.curve_a, m.curve_b, m.coupler.with_delta_phi(2 * d)).g_p;
        CHECK(g2 / g1 == 2.0);
    }
}

TEST_CASE("zero slope flags a degenerate bias point") {
    const auto c = FluxCurve::coupler_model(angular(8.7e9), 1e36, angular(7.7e9));
    const auto r = coupling_rate(c, c, CouplerState(0.0, 0.2));
    CHECK(r.g_p == 0.0);
    CHECK(r.degenerate);
}

TEST_CASE("pump power to flux amplitude") {
    const double calib = 0.2 / std::sqrt(std::pow(10.0, -5.2));
    CHECK(calib == doctest::Approx(79.62).epsilon(1e-4));
    CHECK(flux_calibration_for(-52.0, 0.2) == doctest::Approx(calib).epsilon(1e-15));
    CHECK(pump_power_to_flux(-52.0, calib) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(std::abs(pump_power_to_flux(-58.0, calib) - 0.1) / 0.1 < 3e-3);
    CHECK(pump_power_to_flux(-std::numeric_limits<double>::infinity(), calib) == 0.0);
    CHECK_THROWS_AS(pump_power_to_flux(-52.0, 0.0), ValidationError);
}

}
