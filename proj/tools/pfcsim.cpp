// SPDX-License-Identifier: Apache-2.0
// Command-line front end. Talks to the simulator only through the C API.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "pfc/pfc.h"

namespace {

int report(pfc_status s) {
    std::fprintf(stderr, "pfcsim: %s\n", pfc_last_error());
    return s == PFC_CONVERGENCE_ERROR ? 3 : s == PFC_VALIDATION_ERROR ? 2 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parametric frequency conversion experiments"};
    std::string runner;
    std::string config;
    std::string out = "out";
    std::size_t jobs = 1;
    bool lab = false;
    bool quiet = false;
    app.add_option("runner", runner, "splitting, chevron, power_sweep, store_retrieve, phase_sweep or custom_sequence")
        ->required();
    app.add_option("--config", config, "flat key = value config file")->required();
    app.add_option("--out", out, "output directory")->capture_default_str();
    app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_flag("--lab-frame", lab, "integrate in the lab frame (scaled-frequency systems only)");
    app.add_flag("-q,--quiet", quiet, "do not print metrics");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    pfc_config* cfg = nullptr;
    if (auto s = pfc_config_load(config.c_str(), &cfg); s != PFC_OK)
        return report(s);
    pfc_result* res = nullptr;
    auto s = pfc_run(runner.c_str(), cfg, jobs, lab ? 1 : 0, &res);
    pfc_config_free(cfg);
    if (s != PFC_OK)
        return report(s);
    if (s = pfc_result_write(res, out.c_str()); s != PFC_OK) {
        pfc_result_free(res);
        return report(s);
    }
    if (!quiet) {
        for (std::size_t i = 0; i < pfc_result_metric_count(res); ++i) {
            const char* name = pfc_result_metric_name(res, i);
            double v = 0;
            pfc_result_metric(res, name, &v);
            std::printf("%s = %.10g\n", name, v);
        }
        for (std::size_t i = 0; i < pfc_result_file_count(res); ++i)
            std::printf("wrote %s/%s\n", out.c_str(), pfc_result_file_name(res, i));
    }
    pfc_result_free(res);
    return 0;
}
