// SPDX-License-Identifier: Apache-2.0
#include "pfc/pfc.h"

#include <algorithm>
#include <memory>
#include <new>
#include <string>

#include "pfc/experiments.hpp"

struct pfc_config {
    pfc::ExperimentConfig cfg;
};

struct pfc_result {
    pfc::ExperimentResult res;
    std::vector<std::string> names;
};

struct pfc_sequence {
    pfc::PulseSequence seq;
    mutable std::string emitted;
};

struct pfc_trace {
    pfc::TraceRecord trace;
    mutable std::string csv;
};

namespace {

thread_local std::string last_error;
thread_local std::size_t last_line = 0;

pfc_status fail(pfc_status s, const char* what, std::size_t line = 0) {
    last_error = what;
    last_line = line;
    return s;
}

template <class F>
pfc_status guarded(F&& f) {
    try {
        f();
        last_error.clear();
        last_line = 0;
        return PFC_OK;
    } catch (const pfc::ParseError& e) {
        return fail(PFC_VALIDATION_ERROR, e.what(), e.line());
    } catch (const pfc::ValidationError& e) {
        return fail(PFC_VALIDATION_ERROR, e.what());
    } catch (const pfc::ConvergenceError& e) {
        return fail(PFC_CONVERGENCE_ERROR, e.what());
    } catch (const std::bad_alloc&) {
        return fail(PFC_ERROR, "out of memory");
    } catch (const std::exception& e) {
        return fail(PFC_ERROR, e.what());
    } catch (...) {
        return fail(PFC_ERROR, "unknown error");
    }
}

pfc_status null_arg(const char* name) {
    return fail(PFC_INVALID_ARGUMENT, (std::string("null argument: ") + name).c_str());
}

} // namespace

extern "C" {

const char* pfc_last_error(void) { return last_error.c_str(); }
size_t pfc_last_error_line(void) { return last_line; }

pfc_status pfc_config_new(pfc_config** out) {
    if (!out)
        return null_arg("out");
    return guarded([&] { *out = new pfc_config{}; });
}

pfc_status pfc_config_parse(const char* text, const char* base_dir, pfc_config** out) {
    if (!text || !out)
        return null_arg(!text ? "text" : "out");
    return guarded([&] {
        *out = new pfc_config{pfc::ExperimentConfig::parse(text, base_dir ? base_dir : ".")};
    });
}

pfc_status pfc_config_load(const char* path, pfc_config** out) {
    if (!path || !out)
        return null_arg(!path ? "path" : "out");
    return guarded([&] { *out = new pfc_config{pfc::ExperimentConfig::load(path)}; });
}

pfc_status pfc_config_set(pfc_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value)
        return null_arg(!cfg ? "cfg" : !key ? "key" : "value");
    return guarded([&] { cfg->cfg.set(key, value); });
}

void pfc_config_free(pfc_config* cfg) { delete cfg; }

pfc_status pfc_run(const char* runner, const pfc_config* cfg, size_t jobs, int lab_frame, pfc_result** out) {
    if (!runner || !cfg || !out)
        return null_arg(!runner ? "runner" : !cfg ? "cfg" : "out");
    return guarded([&] {
        pfc::RunOptions opt;
        opt.jobs = jobs == 0 ? 1 : jobs;
        opt.lab_frame = lab_frame != 0;
        auto res = std::make_unique<pfc_result>();
        res->res = pfc::run_experiment(pfc::runner_from_name(runner), cfg->cfg, opt);
        for (const auto& [k, v] : res->res.metrics)
            res->names.push_back(k);
        *out = res.release();
    });
}

pfc_status pfc_result_metric(const pfc_result* res, const char* name, double* value) {
    if (!res || !name || !value)
        return null_arg(!res ? "res" : !name ? "name" : "value");
    auto it = res->res.metrics.find(name);
    if (it == res->res.metrics.end())
        return fail(PFC_INVALID_ARGUMENT, (std::string("no metric '") + name + "'").c_str());
    *value = it->second;
    return PFC_OK;
}

size_t pfc_result_metric_count(const pfc_result* res) { return res ? res->names.size() : 0; }

const char* pfc_result_metric_name(const pfc_result* res, size_t i) {
    return res && i < res->names.size() ? res->names[i].c_str() : nullptr;
}

size_t pfc_result_file_count(const pfc_result* res) { return res ? res->res.files.size() : 0; }

const char* pfc_result_file_name(const pfc_result* res, size_t i) {
    return res && i < res->res.files.size() ? res->res.files[i].first.c_str() : nullptr;
}

const char* pfc_result_file_contents(const pfc_result* res, size_t i) {
    return res && i < res->res.files.size() ? res->res.files[i].second.c_str() : nullptr;
}

pfc_status pfc_result_write(const pfc_result* res, const char* dir) {
    if (!res || !dir)
        return null_arg(!res ? "res" : "dir");
    try {
        pfc::write_outputs(res->res, dir);
    } catch (const std::exception& e) {
        return fail(PFC_IO_ERROR, e.what());
    }
    last_error.clear();
    return PFC_OK;
}

void pfc_result_free(pfc_result* res) { delete res; }

pfc_status pfc_sequence_parse(const char* text, pfc_sequence** out) {
    if (!text || !out)
        return null_arg(!text ? "text" : "out");
    return guarded([&] { *out = new pfc_sequence{pfc::parse_sequence(text), {}}; });
}

pfc_status pfc_sequence_load(const char* path, pfc_sequence** out) {
    if (!path || !out)
        return null_arg(!path ? "path" : "out");
    return guarded([&] { *out = new pfc_sequence{pfc::load_sequence(path), {}}; });
}

const char* pfc_sequence_emit(const pfc_sequence* seq) {
    if (!seq)
        return nullptr;
    seq->emitted = seq->seq.emit();
    return seq->emitted.c_str();
}

size_t pfc_sequence_segment_count(const pfc_sequence* seq) { return seq ? seq->seq.segments().size() : 0; }

pfc_status pfc_sequence_run(const pfc_sequence* seq, pfc_trace** out) {
    if (!seq || !out)
        return null_arg(!seq ? "seq" : "out");
    return guarded([&] { *out = new pfc_trace{pfc::run_sequence(seq->seq), {}}; });
}

void pfc_sequence_free(pfc_sequence* seq) { delete seq; }

size_t pfc_trace_sample_count(const pfc_trace* tr) { return tr ? tr->trace.samples.size() : 0; }

pfc_status pfc_trace_sample(const pfc_trace* tr, size_t i, double* values) {
    if (!tr || !values)
        return null_arg(!tr ? "tr" : "values");
    if (i >= tr->trace.samples.size())
        return fail(PFC_INVALID_ARGUMENT, "sample index out of range");
    const auto& s = tr->trace.samples[i];
    const double v[7] = {s.t, s.a.real(), s.a.imag(), s.b.real(), s.b.imag(), s.a_out.real(), s.a_out.imag()};
    std::copy(v, v + 7, values);
    return PFC_OK;
}

const char* pfc_trace_csv(const pfc_trace* tr) {
    if (!tr)
        return nullptr;
    tr->csv = tr->trace.to_csv();
    return tr->csv.c_str();
}

void pfc_trace_free(pfc_trace* tr) { delete tr; }

} // extern "C"
