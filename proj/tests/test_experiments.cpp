// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pfc/experiments.hpp"

using namespace pfc;

namespace {

ExperimentResult run(Runner r, std::string_view text = "", std::size_t jobs = 1) {
    return run_experiment(r, ExperimentConfig::parse(text), {jobs, false});
}

std::string report_of(const ExperimentResult& res) {
    for (const auto& [name, body] : res.files)
        if (name == "report.txt")
            return body;
    return {};
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("pfc_tests_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_SUITE("experiments") {

TEST_CASE("splitting with defaults") {
    const auto res = run(Runner::splitting);
    CHECK(res.metric("dip_separation_hz") == doctest::Approx(2.4e6).epsilon(0.05));
    CHECK(res.metric("dip_count") == 2);
    CHECK(res.metric("convergence.max_deviation") < 1e-8);
}

TEST_CASE("splitting without modulation shows a single dip") {
    CHECK(run(Runner::splitting, "dphi = 0\n").metric("single_dip") == 1.0);
}

TEST_CASE("splitting scales with modulation depth") {
    const double base = run(Runner::splitting, "dphi = 0.1\nprobe_start = -8MHz\nprobe_stop = 8MHz\nprobe_count = 3201\n").metric("dip_separation_hz");
    const double twice = run(Runner::splitting, "dphi = 0.2\nprobe_start = -8MHz\nprobe_stop = 8MHz\nprobe_count = 3201\n").metric("dip_separation_hz");
    CHECK(twice / base == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("chevron with defaults") {
    const auto res = run(Runner::chevron);
    CHECK(res.metric("fit.g_p_hz") == doctest::Approx(res.metric("g_p_hz")).epsilon(0.02));
    CHECK(res.metric("fit.relative_rms") < 0.02);
    CHECK(res.metric("model_relative_rms") < 0.02);
    CHECK(std::abs(res.metric("ridge_asymmetry")) < 0.01);
    CHECK(res.metric("convergence.max_deviation") < 1e-8);
}

TEST_CASE("power sweep with defaults") {
    const auto res = run(Runner::power_sweep);
    CHECK(res.metric("fit.r_squared") > 0.999);
    CHECK(res.metric("no_oscillation_points") == 1);
    CHECK(res.metric("convergence.max_deviation") < 1e-8);
}

TEST_CASE("six decibels doubles the coupling") {
    const auto res = run(Runner::power_sweep, "power_start = -58dBm\npower_stop = -52dBm\npower_count = 2\npump_off_point = off\n");
    CHECK(res.metric("g_extracted_hz.1") / res.metric("g_extracted_hz.0") ==
          doctest::Approx(std::pow(10.0, 6.0 / 20)).epsilon(0.01));
}

TEST_CASE("store and retrieve with defaults") {
    const auto res = run(Runner::store_retrieve, "", 4);
    CHECK(res.metric("fit.tau_s") == doctest::Approx(14.9e-6).epsilon(0.01));
    CHECK(res.metric("eta_shortest") >= 0.65);
    CHECK(res.metric("eta_shortest") <= 0.85);
    CHECK(res.metric("eta_prime_shortest") >= 0.99);
    CHECK(res.metric("convergence.max_deviation") < 1e-8);
}

TEST_CASE("lossless storage gives a degenerate decay fit") {
    const auto res = run(Runner::store_retrieve, "t1_b = none\ngamma_b = 0Hz\ndelay_start = 1us\ndelay_stop = 20us\ndelay_count = 5\n", 4);
    CHECK(res.metric("fit.degenerate") == 1.0);
}

TEST_CASE("phase sweep with defaults") {
    const auto res = run(Runner::phase_sweep, "", 4);
    CHECK(res.metric("fit.slope") == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(res.metric("magnitude_spread") < 1e-9);
    CHECK(res.metric("energy_spread") < 1e-9);
    // The locus is a circle of radius sqrt(eta) up to the temporal mode mismatch.
    CHECK(res.metric("locus.area_over_pi_eta") == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("efficiency at five microseconds agrees with the decay sweep") {
    const auto sr = run(Runner::store_retrieve, "", 4);
    const auto ps = run(Runner::phase_sweep, "", 4);
    const double energy = sr.metric("fit.amplitude") * std::exp(-5e-6 / sr.metric("fit.tau_s")) + sr.metric("fit.offset");
    const double predicted = energy / sr.metric("reference_energy");
    CHECK(ps.metric("eta") == doctest::Approx(predicted).epsilon(0.2));
}

TEST_CASE("results do not depend on the worker count") {
    const auto a = run(Runner::store_retrieve, "delay_start = 1us\ndelay_stop = 30us\ndelay_count = 5\n", 1);
    const auto b = run(Runner::store_retrieve, "delay_start = 1us\ndelay_stop = 30us\ndelay_count = 5\n", 3);
    CHECK(a.files == b.files);
    CHECK(a.metrics == b.metrics);
}

TEST_CASE("a report is a config that reproduces the run") {
    const auto a = run(Runner::chevron, "delta_start = -2MHz\ndelta_stop = 2MHz\ndelta_count = 5\ntau_stop = 4us\ntau_count = 401\n");
    const auto b = run_experiment(Runner::chevron, ExperimentConfig::parse(report_of(a)));
    CHECK(a.files == b.files);
    CHECK(report_of(a).find("tau_count = 401") != std::string::npos);
}

TEST_CASE("outputs are written to disk") {
    const auto res = run(Runner::splitting, "delta_start = -1MHz\ndelta_stop = 1MHz\ndelta_count = 2\n");
    const auto dir = scratch("write");
    write_outputs(res, dir / "nested");
    for (const auto& [name, body] : res.files) {
        std::ifstream in(dir / "nested" / name);
        std::stringstream ss;
        ss << in.rdbuf();
        CHECK(ss.str() == body);
    }
    CHECK(res.files.front().second.rfind("# ", 0) == 0);
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(ExperimentConfig::parse("colour = 3\n"), ParseError);
    CHECK_THROWS_AS(ExperimentConfig::parse("dphi 0.2\n"), ParseError);
    CHECK_THROWS_AS(ExperimentConfig::parse("dphi = 0.1\ndphi = 0.2\n"), ParseError);
    try {
        ExperimentConfig::parse("nbar = 10\n\ncolour = 3\n");
        FAIL("expected an error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    // Known key, wrong runner.
    CHECK_THROWS_AS(run(Runner::splitting, "delay_start = 1us\ndelay_stop = 2us\ndelay_count = 3\n"), ValidationError);
    CHECK_THROWS_AS(run(Runner::chevron, "delta_start = -1MHz\ndelta_stop = 1MHz\ndelta_count = 1\n"), ValidationError);
    CHECK_THROWS_AS(run(Runner::chevron, "freq_a = 8.7\n"), ValidationError);
    CHECK_THROWS_AS(run(Runner::chevron, "runner = splitting\n"), ValidationError);
    CHECK_THROWS_AS(run(Runner::store_retrieve, "t1_b = -3us\n"), ValidationError);
    CHECK_THROWS_AS(runner_from_name("sweep"), ValidationError);
    CHECK_THROWS_AS(ExperimentConfig::load("/nonexistent/run.cfg"), ValidationError);
}

TEST_CASE("a coarse step fails the convergence check") {
    CHECK_THROWS_AS(run(Runner::chevron, "dt = 5ns\ntau_stop = 20us\n"), ConvergenceError);
}

TEST_CASE("custom sequence") {
    const auto dir = scratch("custom");
    std::ofstream(dir / "seq.txt") << "mode A freq=8.70GHz gamma=170kHz q_int=900e3\n"
                                      "mode B freq=9.33GHz t1=14.9us\n"
                                      "seg load dur=2us nbar=10 method=direct\n"
                                      "seg swap dur=0.6us gp=0.4167MHz\n"
                                      "seg readout dur=2us\n";
    std::ofstream(dir / "run.cfg") << "runner = custom_sequence\nsequence = seq.txt\n";
    const auto cfg = ExperimentConfig::load(dir / "run.cfg");
    REQUIRE(cfg.runner() == Runner::custom_sequence);
    const auto res = run_experiment(Runner::custom_sequence, cfg);
    std::vector<std::string> names;
    for (const auto& f : res.files)
        names.push_back(f.first);
    CHECK(names == std::vector<std::string>{"sequence.txt", "trace.csv", "trace_meta.txt", "report.txt"});
    CHECK(res.metric("convergence.max_deviation") < 1e-8);
}

TEST_CASE("runner names round trip") {
    for (auto r : {Runner::splitting, Runner::chevron, Runner::power_sweep, Runner::store_retrieve, Runner::phase_sweep,
                   Runner::custom_sequence}) {
        CHECK(runner_from_name(runner_name(r)) == r);
        CHECK_FALSE(runner_defaults(r).empty());
    }
}

}
