// SPDX-License-Identifier: Apache-2.0
#include "pfc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include "pfc/analysis.hpp"
#include "text.hpp"

namespace pfc {

namespace {

enum class Kind { bare, count, frequency, time, angle, power, word, path };

struct KeyDef {
    std::string_view key;
    Kind kind;
    std::string_view def;
};

const std::vector<KeyDef> mode_keys{
    {"freq_a", Kind::frequency, "8.70GHz"},
    {"gamma_a", Kind::frequency, "170kHz"},
    {"t1_a", Kind::time, "none"},
    {"q_int_a", Kind::bare, "900e3"},
    {"q_ext_a", Kind::bare, "none"},
    {"freq_b", Kind::frequency, "9.33GHz"},
    {"gamma_b", Kind::frequency, "none"},
    {"t1_b", Kind::time, "14.9us"},
    {"q_int_b", Kind::bare, "none"},
    {"q_ext_b", Kind::bare, "none"},
    {"nbar", Kind::bare, "10"},
    {"dt", Kind::time, "none"},
};

const std::vector<KeyDef> coupler_keys{
    {"coupler_bias", Kind::bare, "none"},
    {"coupler_calib", Kind::bare, "none"},
    {"coupler_offset", Kind::bare, "0"},
    {"coupler_wcmax", Kind::frequency, "7.7GHz"},
    {"coupler_mod_a", Kind::frequency, "4MHz"},
    {"coupler_gp_ref", Kind::frequency, "1.2MHz"},
    {"coupler_dphi_ref", Kind::bare, "0.2"},
    {"coupler_p_ref", Kind::power, "-52dBm"},
};

const std::vector<KeyDef> pulse_keys{
    {"t_swap", Kind::time, "0.6us"},
    {"gp_pulse", Kind::frequency, "none"},
    {"swap_cal", Kind::word, "on"},
    {"swap_delta", Kind::frequency, "0Hz"},
    {"load_dur", Kind::time, "20us"},
    {"load_method", Kind::word, "direct"},
    {"readout", Kind::time, "none"},
};

std::vector<KeyDef> schema(Runner r) {
    std::vector<KeyDef> out{{"runner", Kind::word, "none"}};
    auto add = [&](const std::vector<KeyDef>& v) { out.insert(out.end(), v.begin(), v.end()); };
    switch (r) {
    case Runner::splitting:
        add(mode_keys);
        add(coupler_keys);
        add({{"dphi", Kind::bare, "0.2"},
             {"pump_phase", Kind::angle, "0deg"},
             {"delta_start", Kind::frequency, "-4MHz"},
             {"delta_stop", Kind::frequency, "4MHz"},
             {"delta_count", Kind::count, "9"},
             {"probe_start", Kind::frequency, "-6MHz"},
             {"probe_stop", Kind::frequency, "6MHz"},
             {"probe_count", Kind::count, "2401"}});
        break;
    case Runner::chevron:
        add(mode_keys);
        add(coupler_keys);
        add({{"dphi", Kind::bare, "0.2"},
             {"delta_start", Kind::frequency, "-4MHz"},
             {"delta_stop", Kind::frequency, "4MHz"},
             {"delta_count", Kind::count, "17"},
             {"tau_stop", Kind::time, "8us"},
             {"tau_count", Kind::count, "801"}});
        break;
    case Runner::power_sweep:
        add(mode_keys);
        add(coupler_keys);
        add({{"power_start", Kind::power, "-64dBm"},
             {"power_stop", Kind::power, "-43dBm"},
             {"power_count", Kind::count, "8"},
             {"pump_off_point", Kind::word, "on"},
             {"tau_stop", Kind::time, "10us"},
             {"tau_count", Kind::count, "1001"}});
        break;
    case Runner::store_retrieve:
        add(mode_keys);
        add(pulse_keys);
        add({{"retrieve_phase", Kind::angle, "0deg"},
             {"delay_start", Kind::time, "1us"},
             {"delay_stop", Kind::time, "55us"},
             {"delay_count", Kind::count, "12"}});
        break;
    case Runner::phase_sweep:
        add(mode_keys);
        add(pulse_keys);
        add({{"delay", Kind::time, "5us"},
             {"phase_start", Kind::angle, "0deg"},
             {"phase_stop", Kind::angle, "337.5deg"},
             {"phase_count", Kind::count, "16"}});
        break;
    case Runner::custom_sequence:
        add({{"sequence", Kind::path, "none"}});
        break;
    }
    return out;
}

bool known_anywhere(std::string_view key) {
    for (auto r : {Runner::splitting, Runner::chevron, Runner::power_sweep, Runner::store_retrieve,
                   Runner::phase_sweep, Runner::custom_sequence})
        for (const auto& k : schema(r))
            if (k.key == key)
                return true;
    return false;
}

Dimension dimension_of(Kind k) {
    switch (k) {
    case Kind::frequency: return Dimension::frequency;
    case Kind::time: return Dimension::time;
    case Kind::angle: return Dimension::angle;
    case Kind::power: return Dimension::power;
    default: return Dimension::none;
    }
}

std::string_view kind_label(Kind k) {
    switch (k) {
    case Kind::frequency: return "a frequency";
    case Kind::time: return "a time";
    case Kind::angle: return "an angle";
    case Kind::power: return "a power";
    case Kind::count: return "an integer count";
    default: return "a plain number";
    }
}

void check_value(const KeyDef& def, const std::string& raw) {
    if (raw == "none")
        return;
    if (def.kind == Kind::path)
        return;
    if (def.kind == Kind::word) {
        auto allowed = [&](std::initializer_list<std::string_view> v) {
            if (std::find(v.begin(), v.end(), raw) == v.end())
                throw ValidationError("invalid value '" + raw + "' for " + std::string(def.key));
        };
        if (def.key == "swap_cal" || def.key == "pump_off_point")
            allowed({"on", "off"});
        else if (def.key == "load_method")
            allowed({"drive", "direct"});
        else if (def.key == "runner")
            (void)runner_from_name(raw);
        return;
    }
    const auto q = Quantity::parse(raw);
    if (q.dimension() != dimension_of(def.kind))
        throw ValidationError(std::string(def.key) + " must be " + std::string(kind_label(def.kind)) +
                              ", got '" + raw + "'");
    if (def.kind == Kind::count && (q.value < 2 || std::floor(q.value) != q.value))
        throw ValidationError(std::string(def.key) + " must be an integer of at least 2");
}

// Runner view of a config: defaults overlaid with overrides, typed access.
class Resolved {
public:
    Resolved(Runner r, const ExperimentConfig& cfg) : base_(cfg.base_dir()) {
        defs_ = schema(r);
        for (const auto& d : defs_)
            items_.emplace_back(std::string(d.key), std::string(d.def));
        for (const auto& e : cfg.entries()) {
            auto it = std::find_if(defs_.begin(), defs_.end(), [&](const KeyDef& d) { return d.key == e.key; });
            if (it == defs_.end()) {
                const std::string msg = "key '" + e.key + "' is not used by the " +
                                        std::string(runner_name(r)) + " runner";
                if (e.line)
                    throw ParseError(msg, e.line, 1);
                throw ValidationError(msg);
            }
            try {
                check_value(*it, e.raw);
            } catch (const ValidationError& ex) {
                if (e.line)
                    throw ParseError(ex.what(), e.line, 1);
                throw;
            }
            items_[static_cast<std::size_t>(it - defs_.begin())].second = e.raw;
        }
        if (auto rn = raw("runner"); rn != "none" && runner_from_name(rn) != r)
            throw ValidationError("config is for the " + rn + " runner");
        items_.front().second = std::string(runner_name(r));
    }

    const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

    const std::string& raw(std::string_view key) const {
        for (const auto& [k, v] : items_)
            if (k == key)
                return v;
        throw ValidationError("internal: unknown key " + std::string(key));
    }

    bool has(std::string_view key) const { return raw(key) != "none"; }

    double num(std::string_view key) const {
        if (!has(key))
            throw ValidationError(std::string(key) + " must be set");
        return Quantity::parse(raw(key)).si();
    }

    std::optional<double> opt(std::string_view key) const {
        if (!has(key))
            return std::nullopt;
        return num(key);
    }

    std::size_t count(std::string_view key) const { return static_cast<std::size_t>(num(key)); }

    std::vector<double> axis(const std::string& prefix) const {
        const double lo = num(prefix + "_start");
        const double hi = num(prefix + "_stop");
        const std::size_t n = count(prefix + "_count");
        if (!std::isfinite(lo) || !std::isfinite(hi))
            throw ValidationError(prefix + " axis must have finite limits");
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i)
            v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        v.back() = hi;
        return v;
    }

    ModePair modes() const {
        auto fields = [&](char suffix) {
            std::vector<Field> f;
            for (const char* k : {"freq", "gamma", "t1", "q_int", "q_ext"}) {
                const std::string key = std::string(k) + "_" + suffix;
                if (has(key))
                    f.push_back({k, raw(key)});
            }
            return f;
        };
        return {mode_from_fields(fields('a')), mode_from_fields(fields('b'))};
    }

    FluxModel flux(const ModePair& modes) const {
        std::vector<Field> f;
        for (const auto& [k, v] : items_)
            if (k.starts_with("coupler_") && v != "none")
                f.push_back({k.substr(8), v});
        return flux_model_from_fields(f, modes);
    }

    double nbar() const {
        const double n = num("nbar");
        if (!(n > 0) || !std::isfinite(n))
            throw ValidationError("nbar must be positive");
        return n;
    }

    std::filesystem::path path(std::string_view key) const {
        if (!has(key))
            throw ValidationError(std::string(key) + " must be set");
        std::filesystem::path p(raw(key));
        return p.is_absolute() ? p : base_ / p;
    }

private:
    std::vector<KeyDef> defs_;
    std::vector<std::pair<std::string, std::string>> items_;
    std::filesystem::path base_;
};

// Evaluates fn(0..n-1) on up to `jobs` threads; results and the first
// failure (by index) are independent of scheduling.
template <class F>
auto parallel_map(std::size_t n, std::size_t jobs, F&& fn) {
    using T = decltype(fn(std::size_t{}));
    std::vector<std::optional<T>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                slots[i].emplace(fn(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < jobs; ++j)
            pool.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    std::vector<T> out;
    out.reserve(n);
    for (auto& s : slots)
        out.push_back(std::move(*s));
    return out;
}

constexpr double max_steps = 5e8;

void check_budget(double span, double dt) {
    if (span / dt > max_steps)
        throw ValidationError("run needs more than 5e8 integration steps; the lab frame is meant for "
                              "scaled-frequency systems");
}

void require_converged(double deviation, std::string_view what) {
    if (!(deviation <= convergence_threshold)) {
        std::ostringstream os;
        os << "half-step check failed for " << what << ": relative deviation " << deviation
           << " exceeds " << convergence_threshold;
        throw ConvergenceError(os.str());
    }
}

std::string fmt(double v) { return format_double(v); }

class Csv {
public:
    Csv(const Resolved& r, std::string_view title, std::initializer_list<std::string_view> columns) {
        os_ << "# " << title << '\n';
        for (const auto& [k, v] : r.items())
            os_ << "# " << k << " = " << v << '\n';
        bool first = true;
        for (auto c : columns) {
            os_ << (first ? "" : ",") << c;
            first = false;
        }
        os_ << '\n';
    }

    void row(std::initializer_list<double> values) {
        bool first = true;
        for (double v : values) {
            os_ << (first ? "" : ",") << fmt(v);
            first = false;
        }
        os_ << '\n';
    }

    std::string str() const { return os_.str(); }

private:
    std::ostringstream os_;
};

std::string report_text(const ExperimentResult& res, const std::vector<std::string>& extra) {
    std::ostringstream os;
    os << "# " << runner_name(res.runner) << " report\n";
    os << "# resolved parameters (this block is a valid config file)\n";
    for (const auto& [k, v] : res.resolved)
        os << k << " = " << v << '\n';
    os << "# results\n";
    for (const auto& [k, v] : res.metrics)
        os << "# " << k << " = " << fmt(v) << '\n';
    for (const auto& block : extra)
        for (auto line : text::lines(block))
            os << "# " << line << '\n';
    return os.str();
}

double base_dt(const Resolved& r, const ModePair& modes, const PumpDrive& pump, Frame frame) {
    if (auto dt = r.opt("dt")) {
        if (!(*dt > 0))
            throw ValidationError("dt must be positive");
        return *dt;
    }
    return std::min(1e-9, max_step(modes, pump, nullptr, frame) / 16);
}

// |a|^2 on a uniform grid 0..tau_stop under a constant pump, plus the
// half-step deviation of the same trajectory.
struct Oscillation {
    std::vector<double> energy_a;
    double max_energy_b = 0.0;
    double spacing = 0.0;
    double deviation = 0.0;
};

Oscillation oscillation(const Resolved& r, const ModePair& modes, double g, double delta, Frame frame) {
    const double tau_stop = r.num("tau_stop");
    const std::size_t n = r.count("tau_count");
    if (!(tau_stop > 0))
        throw ValidationError("tau_stop must be positive");
    const PumpDrive pump{pump_frequency_for(delta, modes.a, modes.b), 0.0, Envelope::constant(g)};
    const double spacing = tau_stop / static_cast<double>(n - 1);
    const double dt0 = base_dt(r, modes, pump, frame);
    check_budget(tau_stop, dt0);
    const auto k = static_cast<std::size_t>(std::ceil(spacing / dt0 * (1 - 1e-12)));

    SimConfig cfg;
    cfg.frame = frame;
    cfg.dt = spacing / static_cast<double>(k);
    cfg.t_end = tau_stop;
    cfg.record_stride = k;
    const Amplitudes x0{std::sqrt(r.nbar()), 0.0, 0.0};
    const auto trace = integrate(x0, modes, pump, std::nullopt, cfg);
    if (trace.samples.size() != n)
        throw Error("internal: sample grid misaligned");
    Oscillation out;
    out.spacing = spacing;
    for (const auto& s : trace.samples) {
        out.energy_a.push_back(std::norm(s.a));
        out.max_energy_b = std::max(out.max_energy_b, std::norm(s.b));
    }
    out.deviation = half_step_deviation(x0, modes, pump, std::nullopt, cfg);
    require_converged(out.deviation, "a sweep point");
    return out;
}

ExperimentResult start(Runner runner, const Resolved& r) {
    ExperimentResult res;
    res.runner = runner;
    res.resolved = r.items();
    return res;
}

double coupling_at_dphi(const FluxModel& flux, double dphi) {
    if (!std::isfinite(dphi) || dphi < 0)
        throw ValidationError("dphi must be a non-negative number");
    return coupling_rate(flux.curve_a, flux.curve_b, flux.coupler.with_delta_phi(dphi)).g_p;
}

ExperimentResult run_splitting(const Resolved& r, const RunOptions& o) {
    auto res = start(Runner::splitting, r);
    const auto modes = r.modes();
    const auto flux = r.flux(modes);
    const double g = coupling_at_dphi(flux, r.num("dphi"));
    const double phase = r.num("pump_phase");
    const auto deltas = r.axis("delta");
    const auto probes = r.axis("probe");
    std::vector<double> omegas;
    for (double p : probes)
        omegas.push_back(modes.a.omega() + p);

    auto spectrum = [&](double delta) {
        const PumpDrive pump{pump_frequency_for(delta, modes.a, modes.b), phase, Envelope::constant(g)};
        return reflection_spectrum(modes.a, modes.b, pump, omegas);
    };
    const auto grid = parallel_map(deltas.size(), o.jobs, [&](std::size_t i) { return spectrum(deltas[i]); });

    Csv csv(r, "reflection magnitude vs. pump detuning and probe offset",
            {"delta_hz", "probe_offset_hz", "abs_gamma", "re_gamma", "im_gamma"});
    for (std::size_t i = 0; i < deltas.size(); ++i)
        for (std::size_t j = 0; j < probes.size(); ++j)
            csv.row({hertz(deltas[i]), hertz(probes[j]), std::abs(grid[i][j]), grid[i][j].real(),
                     grid[i][j].imag()});

    const auto centre = spectrum(0.0);
    std::vector<Point> curve;
    for (std::size_t j = 0; j < probes.size(); ++j)
        curve.push_back({probes[j], std::abs(centre[j])});
    const auto minima = local_minima(curve);
    double separation = 0.0;
    if (minima.size() >= 2)
        separation = std::abs(minima[0].x - minima[1].x);

    // The steady state has no time step; check the integrator on the same
    // pumped system instead.
    const PumpDrive pump{pump_frequency_for(0.0, modes.a, modes.b), phase, Envelope::constant(g)};
    SimConfig cfg;
    cfg.dt = base_dt(r, modes, pump, Frame::rotating);
    cfg.t_end = 2e-6;
    const double dev =
        half_step_deviation(Amplitudes{std::sqrt(r.nbar()), 0.0, 0.0}, modes, pump, std::nullopt, cfg);
    require_converged(dev, "the pumped ring-down");

    res.metrics["g_p_hz"] = hertz(g);
    res.metrics["dip_count"] = static_cast<double>(minima.size());
    res.metrics["dip_separation_hz"] = hertz(separation);
    res.metrics["single_dip"] = minima.size() == 1 ? 1.0 : 0.0;
    if (!minima.empty())
        res.metrics["deepest_dip_offset_hz"] = hertz(minima[0].x);
    res.metrics["convergence.max_deviation"] = dev;
    res.files.emplace_back("splitting.csv", csv.str());
    res.files.emplace_back("report.txt", report_text(res, {}));
    return res;
}

ExperimentResult run_chevron(const Resolved& r, const RunOptions& o) {
    auto res = start(Runner::chevron, r);
    const auto modes = r.modes();
    const auto flux = r.flux(modes);
    const double g = coupling_at_dphi(flux, r.num("dphi"));
    if (!(g > 0))
        throw ValidationError("chevron needs a non-zero coupling (dphi > 0)");
    const auto deltas = r.axis("delta");
    const Frame frame = o.lab_frame ? Frame::lab : Frame::rotating;
    const auto runs = parallel_map(deltas.size(), o.jobs,
                                   [&](std::size_t i) { return oscillation(r, modes, g, deltas[i], frame); });

    Csv map(r, "mode A energy vs. pump detuning and pulse length", {"delta_hz", "tau_s", "energy_a"});
    Csv ridge(r, "oscillation frequency vs. pump detuning",
              {"delta_hz", "omega_hz", "model_hz", "relative_error"});
    std::vector<Point> points;
    double max_dev = 0.0;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        const auto& run = runs[i];
        for (std::size_t k = 0; k < run.energy_a.size(); ++k)
            map.row({hertz(deltas[i]), static_cast<double>(k) * run.spacing, run.energy_a[k]});
        const double w = oscillation_frequency(run.energy_a, run.spacing);
        const double model = rabi_frequency(deltas[i], g);
        ridge.row({hertz(deltas[i]), hertz(w), hertz(model), (w - model) / model});
        points.push_back({deltas[i], w});
        max_dev = std::max(max_dev, run.deviation);
    }

    const auto fit = fit_chevron(points);
    double asym = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        const auto& q = points[points.size() - 1 - i];
        if (std::abs(p.x + q.x) <= 1e-9 * std::abs(p.x))
            asym = std::max(asym, std::abs(p.y - q.y) / std::max(p.y, q.y));
    }
    auto centre = std::min_element(points.begin(), points.end(),
                                   [](const Point& a, const Point& b) { return std::abs(a.x) < std::abs(b.x); });

    res.metrics["g_p_hz"] = hertz(g);
    res.metrics["fit.g_p_hz"] = hertz(fit.param("g_p"));
    res.metrics["fit.relative_rms"] = fit.residual_rms;
    res.metrics["model_relative_rms"] = chevron_relative_rms(points, g);
    res.metrics["ridge_centre_delta_hz"] = hertz(centre->x);
    res.metrics["ridge_centre_over_2g"] = centre->y / (2 * g);
    res.metrics["ridge_asymmetry"] = asym;
    res.metrics["convergence.max_deviation"] = max_dev;
    res.files.emplace_back("chevron_map.csv", map.str());
    res.files.emplace_back("chevron_ridge.csv", ridge.str());
    res.files.emplace_back("report.txt", report_text(res, {fit.to_text("fit")}));
    return res;
}

ExperimentResult run_power_sweep(const Resolved& r, const RunOptions& o) {
    auto res = start(Runner::power_sweep, r);
    const auto modes = r.modes();
    const auto flux = r.flux(modes);
    auto powers = r.axis("power");
    if (r.raw("pump_off_point") == "on")
        powers.insert(powers.begin(), -std::numeric_limits<double>::infinity());
    const Frame frame = o.lab_frame ? Frame::lab : Frame::rotating;

    struct PointResult {
        double g_model;
        std::optional<double> omega;
        double deviation;
    };
    const auto runs = parallel_map(powers.size(), o.jobs, [&](std::size_t i) {
        const double g = flux.coupling_at_power(powers[i]).g_p;
        PointResult p{g, std::nullopt, 0.0};
        const auto run = oscillation(r, modes, g, 0.0, frame);
        p.deviation = run.deviation;
        // Nothing reaches mode B without an exchange.
        if (run.max_energy_b > 1e-12 * r.nbar()) {
            try {
                p.omega = oscillation_frequency(run.energy_a, run.spacing);
            } catch (const NoOscillationError&) {
            }
        }
        return p;
    });

    Csv csv(r, "extracted swap rate vs. pump power",
            {"power_dbm", "amplitude_sqrt_mw", "g_model_hz", "g_extracted_hz", "oscillating"});
    std::vector<Point> line;
    double max_dev = 0.0;
    std::size_t silent = 0;
    for (std::size_t i = 0; i < powers.size(); ++i) {
        const double amp = std::pow(10.0, powers[i] / 20.0);
        const auto& p = runs[i];
        const double g_ext = p.omega ? *p.omega / 2 : std::numeric_limits<double>::quiet_NaN();
        csv.row({powers[i], amp, hertz(p.g_model), hertz(g_ext), p.omega ? 1.0 : 0.0});
        if (p.omega)
            line.push_back({amp, hertz(g_ext)});
        else
            ++silent;
        max_dev = std::max(max_dev, p.deviation);
    }

    std::vector<std::string> extra;
    res.metrics["no_oscillation_points"] = static_cast<double>(silent);
    if (line.size() >= 2) {
        const auto fit = fit_line(line);
        res.metrics["fit.slope_hz_per_sqrt_mw"] = fit.param("slope");
        res.metrics["fit.intercept_hz"] = fit.param("intercept");
        res.metrics["fit.r_squared"] = fit.param("r_squared");
        extra.push_back(fit.to_text("fit"));
    }
    for (std::size_t i = 0; i < powers.size(); ++i)
        if (runs[i].omega)
            res.metrics["g_extracted_hz." + std::to_string(i)] = hertz(*runs[i].omega / 2);
    res.metrics["convergence.max_deviation"] = max_dev;
    res.files.emplace_back("power_sweep.csv", csv.str());
    res.files.emplace_back("report.txt", report_text(res, extra));
    return res;
}

// Storage and retrieval pulses shared by the delay and phase sweeps.
struct PulsePlan {
    ModePair modes;
    double nbar;
    double g;
    double t_store;
    double t_retrieve;
    double delta;
    double load_dur;
    LoadMethod method;
    double readout;
    SimSettings sim;
};

PulsePlan plan_pulses(const Resolved& r, const RunOptions& o) {
    PulsePlan p{r.modes(), r.nbar(), 0, 0, 0, 0, 0, LoadMethod::direct, 0, {}};
    const double t_swap = r.num("t_swap");
    if (!(t_swap > 0))
        throw ValidationError("t_swap must be positive");
    p.g = r.has("gp_pulse") ? r.num("gp_pulse") : std::numbers::pi / (2 * t_swap);
    if (!(p.g > 0))
        throw ValidationError("gp_pulse must be positive");
    p.delta = r.num("swap_delta");
    p.load_dur = r.num("load_dur");
    p.method = r.raw("load_method") == "drive" ? LoadMethod::drive : LoadMethod::direct;
    p.readout = r.has("readout") ? r.num("readout") : 5.0 / p.modes.a.gamma_total();
    if (!(p.readout > 0) || !std::isfinite(p.readout))
        throw ValidationError("readout must be positive (mode A needs a loss rate for the default)");
    if (auto dt = r.opt("dt"))
        p.sim.dt = *dt;
    p.sim.frame = o.lab_frame ? Frame::lab : Frame::rotating;

    if (r.raw("swap_cal") == "on") {
        const double nominal = std::numbers::pi / (2 * p.g);
        const double dt = std::min(p.sim.dt.value_or(1e-9), 1e-9);
        p.t_store = calibrate_swap_time(p.modes, p.g, 0.5 * nominal, 1.5 * nominal, SwapDirection::a_to_b, dt);
        p.t_retrieve =
            calibrate_swap_time(p.modes, p.g, 0.5 * nominal, 1.5 * nominal, SwapDirection::b_to_a, dt);
    } else {
        p.t_store = p.t_retrieve = t_swap;
    }
    return p;
}

PulseSequence storage_sequence(const PulsePlan& p, double delay, double phase) {
    PulseSequence seq(p.modes, {Segment::load(p.load_dur, p.nbar, p.method),
                                Segment::swap(p.t_store, p.g, p.delta, 0.0),
                                Segment::delay(delay),
                                Segment::swap(p.t_retrieve, p.g, p.delta, phase),
                                Segment::readout(p.readout)});
    seq.set_sim(p.sim);
    return seq;
}

PulseSequence reference_sequence(const PulsePlan& p) {
    PulseSequence seq(p.modes, {Segment::load(p.load_dur, p.nbar, p.method),
                                Segment::readout(p.t_retrieve + p.readout)});
    seq.set_sim(p.sim);
    return seq;
}

struct SequenceRun {
    TraceRecord trace;
    IQ iq;
    double deviation;
};

SequenceRun run_checked(const PulseSequence& seq, std::string_view window_label) {
    if (seq.sim().frame == Frame::lab)
        check_budget(seq.total_duration(), seq.sim().dt.value_or(two_pi / (50 * seq.modes().b.omega())));
    SequenceRun out{run_sequence(seq), {}, half_step_deviation(seq)};
    require_converged(out.deviation, "a pulse sequence");
    const auto& win = find_span(out.trace, window_label);
    out.iq = demodulate(out.trace, seq.modes().a.omega(), win.t_start, out.trace.samples.back().t);
    return out;
}

void plan_metrics(ExperimentResult& res, const PulsePlan& p) {
    res.metrics["g_pulse_hz"] = hertz(p.g);
    res.metrics["t_store_s"] = p.t_store;
    res.metrics["t_retrieve_s"] = p.t_retrieve;
    res.metrics["readout_s"] = p.readout;
}

ExperimentResult run_store_retrieve(const Resolved& r, const RunOptions& o) {
    auto res = start(Runner::store_retrieve, r);
    const auto plan = plan_pulses(r, o);
    const auto delays = r.axis("delay");
    for (double d : delays)
        if (!(d > 0))
            throw ValidationError("delays must be positive");
    const double phase = r.num("retrieve_phase");

    const auto ref = run_checked(reference_sequence(plan), "1:readout");
    const auto runs = parallel_map(delays.size(), o.jobs, [&](std::size_t i) {
        auto run = run_checked(storage_sequence(plan, delays[i], phase), "3:swap");
        if (i != 0)
            run.trace.samples.clear();
        return run;
    });

    Csv csv(r, "retrieved energy vs. storage delay",
            {"delay_s", "retrieved_energy", "reference_energy", "eta", "i", "q"});
    std::vector<Point> decay;
    double max_dev = ref.deviation;
    for (std::size_t i = 0; i < delays.size(); ++i) {
        const auto& iq = runs[i].iq;
        const double eta = efficiency(iq.energy, ref.iq.energy);
        csv.row({delays[i], iq.energy, ref.iq.energy, eta, iq.i, iq.q});
        decay.push_back({delays[i], iq.energy});
        max_dev = std::max(max_dev, runs[i].deviation);
    }

    std::vector<std::string> extra;
    plan_metrics(res, plan);
    res.metrics["reference_energy"] = ref.iq.energy;
    const double eta_short = efficiency(runs.front().iq.energy, ref.iq.energy);
    res.metrics["eta_shortest"] = eta_short;
    res.metrics["eta_prime_shortest"] = loss_corrected_efficiency(eta_short, runs.front().trace, plan.modes);
    if (decay.size() >= 4) {
        const auto fit = fit_exponential_decay(decay);
        res.metrics["fit.tau_s"] = fit.param("tau");
        res.metrics["fit.amplitude"] = fit.param("amplitude");
        res.metrics["fit.offset"] = fit.param("offset");
        res.metrics["fit.degenerate"] = fit.degenerate ? 1.0 : 0.0;
        res.metrics["configured_tau_s"] = 1.0 / plan.modes.b.gamma_total();
        extra.push_back(fit.to_text("fit"));
    }
    res.metrics["convergence.max_deviation"] = max_dev;
    res.files.emplace_back("store_retrieve.csv", csv.str());
    res.files.emplace_back("report.txt", report_text(res, extra));
    return res;
}

ExperimentResult run_phase_sweep(const Resolved& r, const RunOptions& o) {
    auto res = start(Runner::phase_sweep, r);
    const auto plan = plan_pulses(r, o);
    const double delay = r.num("delay");
    if (!(delay > 0))
        throw ValidationError("delay must be positive");
    const auto phases = r.axis("phase");

    const auto ref = run_checked(reference_sequence(plan), "1:readout");
    const auto runs = parallel_map(phases.size(), o.jobs, [&](std::size_t i) {
        auto run = run_checked(storage_sequence(plan, delay, phases[i]), "3:swap");
        run.trace.samples.clear();
        return run;
    });

    const double ref_mag = std::abs(ref.iq.value());
    Csv csv(r, "retrieved IQ vs. relative pump phase",
            {"phase_rad", "i", "q", "i_norm", "q_norm", "magnitude_norm", "arg_rad", "energy"});
    std::vector<Point> arg_points;
    std::vector<cplx> locus;
    double mag_lo = std::numeric_limits<double>::infinity();
    double mag_hi = 0.0;
    double e_lo = mag_lo;
    double e_hi = 0.0;
    double e_sum = 0.0;
    double mag_sq_sum = 0.0;
    double max_dev = ref.deviation;
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const auto& iq = runs[i].iq;
        const cplx z = iq.value() / ref_mag;
        csv.row({phases[i], iq.i, iq.q, z.real(), z.imag(), std::abs(z), std::arg(z), iq.energy});
        arg_points.push_back({phases[i], std::arg(z)});
        locus.push_back(z);
        mag_lo = std::min(mag_lo, std::abs(iq.value()));
        mag_hi = std::max(mag_hi, std::abs(iq.value()));
        e_lo = std::min(e_lo, iq.energy);
        e_hi = std::max(e_hi, iq.energy);
        e_sum += iq.energy;
        mag_sq_sum += std::norm(z);
        max_dev = std::max(max_dev, runs[i].deviation);
    }
    const double n = static_cast<double>(phases.size());
    const auto fit = fit_phase_slope(arg_points);
    const double eta = efficiency(e_sum / n, ref.iq.energy);

    plan_metrics(res, plan);
    res.metrics["fit.slope"] = fit.param("slope");
    res.metrics["fit.intercept"] = fit.param("intercept");
    res.metrics["magnitude_spread"] = (mag_hi - mag_lo) / mag_hi;
    res.metrics["energy_spread"] = (e_hi - e_lo) / e_hi;
    res.metrics["eta"] = eta;
    res.metrics["locus.polygon_area"] = std::abs(polygon_area(locus));
    res.metrics["locus.circle_area"] = std::numbers::pi * mag_sq_sum / n;
    res.metrics["locus.area_over_pi_eta"] = (mag_sq_sum / n) / eta;
    res.metrics["convergence.max_deviation"] = max_dev;
    res.files.emplace_back("phase_sweep.csv", csv.str());
    res.files.emplace_back("report.txt", report_text(res, {fit.to_text("fit")}));
    return res;
}

ExperimentResult run_custom(const Resolved& r, const RunOptions& o) {
    auto res = start(Runner::custom_sequence, r);
    auto seq = load_sequence(r.path("sequence").string());
    if (o.lab_frame) {
        auto sim = seq.sim();
        sim.frame = Frame::lab;
        seq.set_sim(sim);
    }
    if (seq.sim().frame == Frame::lab)
        check_budget(seq.total_duration(), seq.sim().dt.value_or(two_pi / (50 * seq.modes().b.omega())));
    const auto trace = run_sequence(seq);
    const double dev = half_step_deviation(seq);
    require_converged(dev, "the sequence");
    const auto last = trace.final_state();
    const auto iq = demodulate(trace, seq.modes().a.omega(), trace.samples.front().t, trace.samples.back().t);
    res.metrics["final_energy_a"] = std::norm(last.a);
    res.metrics["final_energy_b"] = std::norm(last.b);
    res.metrics["leaked_energy"] = iq.energy;
    res.metrics["t_end_s"] = last.t;
    res.metrics["segments"] = static_cast<double>(seq.segments().size());
    res.metrics["convergence.max_deviation"] = dev;
    res.files.emplace_back("sequence.txt", seq.emit());
    res.files.emplace_back("trace.csv", trace.to_csv());
    res.files.emplace_back("trace_meta.txt", trace.metadata_text());
    res.files.emplace_back("report.txt", report_text(res, {}));
    return res;
}

} // namespace

std::string_view runner_name(Runner r) noexcept {
    switch (r) {
    case Runner::splitting: return "splitting";
    case Runner::chevron: return "chevron";
    case Runner::power_sweep: return "power_sweep";
    case Runner::store_retrieve: return "store_retrieve";
    case Runner::phase_sweep: return "phase_sweep";
    case Runner::custom_sequence: return "custom_sequence";
    }
    return "unknown";
}

Runner runner_from_name(std::string_view name) {
    for (auto r : {Runner::splitting, Runner::chevron, Runner::power_sweep, Runner::store_retrieve,
                   Runner::phase_sweep, Runner::custom_sequence})
        if (runner_name(r) == name)
            return r;
    throw ValidationError("unknown runner '" + std::string(name) + "'");
}

ExperimentConfig ExperimentConfig::parse(std::string_view text, std::filesystem::path base_dir) {
    ExperimentConfig cfg;
    cfg.base_dir_ = std::move(base_dir);
    const auto ls = text::lines(text);
    for (std::size_t n = 0; n < ls.size(); ++n) {
        std::string_view line = ls[n];
        if (auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        if (text::trim(line).empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParseError("expected 'key = value'", n + 1, 1);
        const auto key = std::string(text::trim(line.substr(0, eq)));
        const auto raw = std::string(text::trim(line.substr(eq + 1)));
        if (key.empty() || key.find_first_of(" \t") != std::string::npos)
            throw ParseError("malformed key", n + 1, 1);
        if (raw.empty() || raw.find_first_of(" \t") != std::string::npos)
            throw ParseError("value must be a single token", n + 1, eq + 2);
        if (!known_anywhere(key))
            throw ParseError("unknown key '" + key + "'", n + 1, 1);
        for (const auto& e : cfg.entries_)
            if (e.key == key)
                throw ParseError("duplicate key '" + key + "'", n + 1, 1);
        cfg.entries_.push_back({key, raw, n + 1});
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    return parse(text::read_file(path.string()), path.parent_path().empty() ? "." : path.parent_path());
}

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
    if (!known_anywhere(key))
        throw ValidationError("unknown key '" + key + "'");
    if (raw.empty() || raw.find_first_of(" \t") != std::string::npos)
        throw ValidationError("value must be a single token");
    for (auto& e : entries_)
        if (e.key == key) {
            e.raw = raw;
            e.line = 0;
            return;
        }
    entries_.push_back({key, raw, 0});
}

std::optional<Runner> ExperimentConfig::runner() const {
    for (const auto& e : entries_)
        if (e.key == "runner" && e.raw != "none")
            return runner_from_name(e.raw);
    return std::nullopt;
}

double ExperimentResult::metric(const std::string& name) const {
    auto it = metrics.find(name);
    if (it == metrics.end())
        throw ValidationError("result has no metric '" + name + "'");
    return it->second;
}

std::vector<std::pair<std::string, std::string>> runner_defaults(Runner r) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& d : schema(r))
        out.emplace_back(std::string(d.key), std::string(d.def));
    return out;
}

ExperimentResult run_experiment(Runner runner, const ExperimentConfig& config, const RunOptions& options) {
    const Resolved r(runner, config);
    switch (runner) {
    case Runner::splitting: return run_splitting(r, options);
    case Runner::chevron: return run_chevron(r, options);
    case Runner::power_sweep: return run_power_sweep(r, options);
    case Runner::store_retrieve: return run_store_retrieve(r, options);
    case Runner::phase_sweep: return run_phase_sweep(r, options);
    case Runner::custom_sequence: return run_custom(r, options);
    }
    throw ValidationError("unknown runner");
}

void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw Error("cannot create " + dir.string() + ": " + ec.message());
    for (const auto& [name, contents] : result.files) {
        const auto path = dir / name;
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f || !(f << contents) || !f.flush())
            throw Error("cannot write " + path.string());
    }
}

} // namespace pfc
