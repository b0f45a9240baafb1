// SPDX-License-Identifier: Apache-2.0
#include "pfc/sequencer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "text.hpp"

namespace pfc {

namespace {

enum class ValueKind { bare, frequency, time, angle, power, word };

struct KeySpec {
    std::string_view key;
    ValueKind kind;
};

const std::vector<KeySpec>& keys_for(std::string_view directive) {
    static const std::map<std::string_view, std::vector<KeySpec>> table{
        {"mode",
         {{"freq", ValueKind::frequency},
          {"q_int", ValueKind::bare},
          {"q_ext", ValueKind::bare},
          {"gamma", ValueKind::frequency},
          {"t1", ValueKind::time}}},
        {"sim", {{"dt", ValueKind::time}, {"stride", ValueKind::bare}, {"frame", ValueKind::word}}},
        {"coupler",
         {{"bias", ValueKind::bare},
          {"calib", ValueKind::bare},
          {"offset", ValueKind::bare},
          {"wcmax", ValueKind::frequency},
          {"mod_a", ValueKind::frequency},
          {"gp_ref", ValueKind::frequency},
          {"dphi_ref", ValueKind::bare},
          {"p_ref", ValueKind::power}}},
        {"load",
         {{"dur", ValueKind::time},
          {"nbar", ValueKind::bare},
          {"ain", ValueKind::bare},
          {"freq", ValueKind::frequency},
          {"phase", ValueKind::angle},
          {"method", ValueKind::word}}},
        {"swap",
         {{"dur", ValueKind::time},
          {"gp", ValueKind::frequency},
          {"power", ValueKind::power},
          {"delta", ValueKind::frequency},
          {"phase", ValueKind::angle},
          {"ramp", ValueKind::time}}},
        {"delay", {{"dur", ValueKind::time}}},
        {"readout", {{"dur", ValueKind::time}}},
    };
    return table.at(directive);
}

Dimension dimension_of(ValueKind k) {
    switch (k) {
    case ValueKind::frequency: return Dimension::frequency;
    case ValueKind::time: return Dimension::time;
    case ValueKind::angle: return Dimension::angle;
    case ValueKind::power: return Dimension::power;
    default: return Dimension::none;
    }
}

std::string_view kind_label(ValueKind k) {
    switch (k) {
    case ValueKind::frequency: return "a frequency unit (GHz, MHz, kHz, Hz)";
    case ValueKind::time: return "a time unit (s, us, ns)";
    case ValueKind::angle: return "an angle unit (deg, rad)";
    case ValueKind::power: return "dBm";
    default: return "no unit";
    }
}

// Checks one field against the key table; the message does not carry a position.
void check_field(std::string_view directive, const Field& f) {
    const auto& keys = keys_for(directive);
    auto it = std::find_if(keys.begin(), keys.end(), [&](const KeySpec& k) { return k.key == f.key; });
    if (it == keys.end())
        throw ValidationError("unknown key '" + f.key + "' for " + std::string(directive));
    if (it->kind == ValueKind::word) {
        if (f.raw.empty())
            throw ValidationError("empty value for '" + f.key + "'");
        return;
    }
    const auto q = Quantity::parse(f.raw);
    if (q.dimension() != dimension_of(it->kind))
        throw ValidationError("'" + f.key + "' needs " + std::string(kind_label(it->kind)));
}

void check_fields(std::string_view directive, const std::vector<Field>& fields) {
    std::set<std::string> seen;
    for (const auto& f : fields) {
        check_field(directive, f);
        if (!seen.insert(f.key).second)
            throw ValidationError("duplicate key '" + f.key + "'");
    }
}

const Field* find(const std::vector<Field>& fields, std::string_view key) {
    for (const auto& f : fields)
        if (f.key == key)
            return &f;
    return nullptr;
}

std::optional<double> value(const std::vector<Field>& fields, std::string_view key) {
    const auto* f = find(fields, key);
    if (!f)
        return std::nullopt;
    return Quantity::parse(f->raw).si();
}

std::optional<std::string> word(const std::vector<Field>& fields, std::string_view key) {
    const auto* f = find(fields, key);
    if (!f)
        return std::nullopt;
    return f->raw;
}

Field field(std::string key, double v, Unit u) { return {std::move(key), Quantity::of(v, u).str()}; }

std::string emit_line(std::string_view head, const std::vector<Field>& fields) {
    std::string out(head);
    for (const auto& f : fields)
        out += " " + f.key + "=" + f.raw;
    return out;
}

SegmentKind segment_kind(std::string_view s) {
    if (s == "load") return SegmentKind::load;
    if (s == "swap") return SegmentKind::swap;
    if (s == "delay") return SegmentKind::delay;
    if (s == "readout") return SegmentKind::readout;
    throw ValidationError("unknown segment kind '" + std::string(s) + "'");
}

std::vector<Field> mode_fields_of(const ModeParams& m) {
    std::vector<Field> f{field("freq", hertz(m.omega()), Unit::Hz)};
    if (m.gamma_int() > 0)
        f.push_back({"q_int", format_double(m.q_int())});
    if (m.gamma_ext() > 0)
        f.push_back({"q_ext", format_double(m.q_ext())});
    return f;
}

SimSettings sim_from_fields(const std::vector<Field>& fields) {
    SimSettings s;
    if (auto v = value(fields, "dt")) {
        if (!(*v > 0))
            throw ValidationError("sim dt must be positive");
        s.dt = *v;
    }
    if (auto v = value(fields, "stride")) {
        if (!(*v >= 1) || std::floor(*v) != *v)
            throw ValidationError("sim stride must be a positive integer");
        s.stride = static_cast<std::size_t>(*v);
    }
    if (auto w = word(fields, "frame")) {
        if (*w == "lab")
            s.frame = Frame::lab;
        else if (*w == "rotating")
            s.frame = Frame::rotating;
        else
            throw ValidationError("sim frame must be 'lab' or 'rotating'");
    }
    return s;
}

std::vector<Field> sim_fields_of(const SimSettings& s) {
    std::vector<Field> f;
    if (s.dt)
        f.push_back(field("dt", *s.dt * 1e9, Unit::ns));
    if (s.stride != 1)
        f.push_back({"stride", std::to_string(s.stride)});
    if (s.frame != Frame::rotating)
        f.push_back({"frame", std::string(frame_name(s.frame))});
    return f;
}

} // namespace

FluxModel flux_model_from_fields(const std::vector<Field>& fields, const ModePair& modes) {
    FluxCalibrationTargets targets;
    if (auto v = value(fields, "offset")) targets.phi_offset = *v;
    if (auto v = value(fields, "wcmax")) targets.omega_c_max = *v;
    if (auto v = value(fields, "mod_a")) targets.modulation_a = *v;
    if (auto v = value(fields, "gp_ref")) targets.coupling = *v;
    if (auto v = value(fields, "dphi_ref")) targets.delta_phi_ref = *v;
    if (auto v = value(fields, "p_ref")) targets.power_ref_dbm = *v;
    auto model = calibrate_flux_model(modes.a.omega(), modes.b.omega(), targets);
    if (auto v = value(fields, "bias"))
        model.coupler = CouplerState(*v, model.coupler.delta_phi(), model.coupler.phi_offset(),
                                     model.coupler.omega_c_max());
    if (auto v = value(fields, "calib")) {
        if (!(*v > 0))
            throw ValidationError("coupler calib must be positive");
        model.power_calib = *v;
    }
    return model;
}

std::string_view segment_kind_name(SegmentKind k) noexcept {
    switch (k) {
    case SegmentKind::load: return "load";
    case SegmentKind::swap: return "swap";
    case SegmentKind::delay: return "delay";
    case SegmentKind::readout: return "readout";
    }
    return "?";
}

Segment Segment::from_fields(SegmentKind kind, std::vector<Field> fields) {
    check_fields(segment_kind_name(kind), fields);
    Segment s;
    s.kind_ = kind;
    auto dur = value(fields, "dur");
    if (!dur)
        throw ValidationError("missing duration");
    if (!(*dur > 0))
        throw ValidationError("duration must be positive");
    s.duration_ = *dur;

    if (kind == SegmentKind::load) {
        auto& l = s.load_;
        l.nbar = value(fields, "nbar");
        l.amp_in = value(fields, "ain");
        l.omega_d = value(fields, "freq");
        l.phase = value(fields, "phase").value_or(0.0);
        if (l.nbar.has_value() == l.amp_in.has_value())
            throw ValidationError("load needs exactly one of nbar, ain");
        if (l.nbar && !(*l.nbar >= 0))
            throw ValidationError("nbar must be non-negative");
        if (l.amp_in && !(*l.amp_in >= 0))
            throw ValidationError("ain must be non-negative");
        if (l.omega_d && !(*l.omega_d > 0))
            throw ValidationError("drive frequency must be positive");
        if (auto m = word(fields, "method")) {
            if (*m == "drive")
                l.method = LoadMethod::drive;
            else if (*m == "direct")
                l.method = LoadMethod::direct;
            else
                throw ValidationError("load method must be 'drive' or 'direct'");
        }
        if (l.method == LoadMethod::direct && !l.nbar)
            throw ValidationError("direct load needs nbar");
    } else if (kind == SegmentKind::swap) {
        auto& w = s.swap_;
        w.g_p = value(fields, "gp");
        w.power_dbm = value(fields, "power");
        w.delta = value(fields, "delta").value_or(0.0);
        w.phase = value(fields, "phase").value_or(0.0);
        w.ramp = value(fields, "ramp").value_or(0.0);
        if (w.g_p.has_value() == w.power_dbm.has_value())
            throw ValidationError("swap needs exactly one of gp, power");
        if (w.g_p && !(*w.g_p >= 0))
            throw ValidationError("gp must be non-negative");
        if (!(w.ramp >= 0) || 2 * w.ramp > s.duration_)
            throw ValidationError("ramp must be non-negative and at most half the duration");
    }
    s.fields_ = std::move(fields);
    return s;
}

Segment Segment::load(double duration, double nbar, LoadMethod method) {
    std::vector<Field> f{field("dur", duration * 1e6, Unit::us), {"nbar", format_double(nbar)}};
    if (method == LoadMethod::direct)
        f.push_back({"method", "direct"});
    return from_fields(SegmentKind::load, std::move(f));
}

Segment Segment::swap(double duration, double g_p, double delta, double phase, double ramp) {
    std::vector<Field> f{field("dur", duration * 1e6, Unit::us), field("gp", hertz(g_p), Unit::Hz),
                         field("delta", hertz(delta), Unit::Hz), field("phase", phase, Unit::rad)};
    if (ramp > 0)
        f.push_back(field("ramp", ramp * 1e9, Unit::ns));
    return from_fields(SegmentKind::swap, std::move(f));
}

Segment Segment::swap_at_power(double duration, double power_dbm, double delta, double phase) {
    return from_fields(SegmentKind::swap,
                       {field("dur", duration * 1e6, Unit::us), field("power", power_dbm, Unit::dBm),
                        field("delta", hertz(delta), Unit::Hz), field("phase", phase, Unit::rad)});
}

Segment Segment::delay(double duration) {
    return from_fields(SegmentKind::delay, {field("dur", duration * 1e6, Unit::us)});
}

Segment Segment::readout(double duration) {
    return from_fields(SegmentKind::readout, {field("dur", duration * 1e6, Unit::us)});
}

std::string Segment::emit() const {
    return emit_line("seg " + std::string(segment_kind_name(kind_)), fields_);
}

ModeParams mode_from_fields(const std::vector<Field>& fields) {
    check_fields("mode", fields);
    auto omega = value(fields, "freq");
    if (!omega)
        throw ValidationError("mode needs freq");
    if (!(*omega > 0))
        throw ValidationError("mode frequency must be positive");
    const auto q_int = value(fields, "q_int");
    const auto q_ext = value(fields, "q_ext");
    const auto gamma = value(fields, "gamma");
    const auto t1 = value(fields, "t1");
    if (gamma && t1)
        throw ValidationError("mode takes at most one of gamma, t1");
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (!gamma && !t1)
        return ModeParams::from_q(*omega, q_int.value_or(inf), q_ext.value_or(inf));

    double total = 0.0;
    if (gamma) {
        if (!(*gamma >= 0))
            throw ValidationError("gamma must be non-negative");
        total = *gamma;
    } else {
        if (!(*t1 > 0))
            throw ValidationError("t1 must be positive");
        total = 1.0 / *t1;
    }
    if (q_int && q_ext)
        throw ValidationError("mode is overdetermined: q_int, q_ext and a total rate");
    if (q_int) {
        const double gi = ModeParams::from_q(*omega, *q_int, inf).gamma_int();
        if (gi > total)
            throw ValidationError("q_int implies more loss than the total rate");
        return ModeParams(*omega, gi, total - gi);
    }
    if (q_ext) {
        const double ge = ModeParams::from_q(*omega, inf, *q_ext).gamma_ext();
        if (ge > total)
            throw ValidationError("q_ext implies more loss than the total rate");
        return ModeParams(*omega, total - ge, ge);
    }
    return ModeParams(*omega, total, 0.0);
}

ModeParams default_mode_a() {
    return mode_from_fields({{"freq", "8.70GHz"}, {"gamma", "170kHz"}, {"q_int", "900e3"}});
}

ModeParams default_mode_b() { return mode_from_fields({{"freq", "9.33GHz"}, {"t1", "14.9us"}}); }

PulseSequence::PulseSequence(ModePair modes, std::vector<Segment> segments)
    : modes_(std::move(modes)), mode_a_fields_(mode_fields_of(modes_.a)),
      mode_b_fields_(mode_fields_of(modes_.b)), segments_(std::move(segments)) {}

const FluxModel& PulseSequence::flux_model() const {
    if (!flux_)
        throw ValidationError("sequence has no flux model");
    return *flux_;
}

PulseSequence& PulseSequence::set_sim(SimSettings sim) {
    if (sim.stride < 1)
        throw ValidationError("record stride must be at least 1");
    if (sim.dt && !(*sim.dt > 0))
        throw ValidationError("sim dt must be positive");
    sim_ = sim;
    sim_fields_ = sim_fields_of(sim_);
    return *this;
}

PulseSequence& PulseSequence::set_flux_model(FluxModel model) {
    flux_ = std::move(model);
    coupler_fields_ = {{"bias", format_double(flux_->coupler.phi_dc())},
                       {"calib", format_double(flux_->power_calib)}};
    return *this;
}

PulseSequence& PulseSequence::add(Segment s) {
    segments_.push_back(std::move(s));
    return *this;
}

double PulseSequence::total_duration() const noexcept {
    double t = 0.0;
    for (const auto& s : segments_)
        t += s.duration();
    return t;
}

std::string PulseSequence::emit() const {
    std::string out;
    if (!mode_a_fields_.empty())
        out += emit_line("mode A", mode_a_fields_) + "\n";
    if (!mode_b_fields_.empty())
        out += emit_line("mode B", mode_b_fields_) + "\n";
    if (!sim_fields_.empty())
        out += emit_line("sim", sim_fields_) + "\n";
    if (!coupler_fields_.empty())
        out += emit_line("coupler", coupler_fields_) + "\n";
    for (const auto& s : segments_)
        out += s.emit() + "\n";
    return out;
}

PulseSequence parse_sequence(std::string_view text) {
    PulseSequence seq;
    bool have_a = false;
    bool have_b = false;
    bool have_sim = false;
    bool have_coupler = false;
    std::vector<std::pair<SegmentKind, std::vector<Field>>> raw_segments;

    const auto all = text::lines(text);
    for (std::size_t ln = 0; ln < all.size(); ++ln) {
        const std::size_t lineno = ln + 1;
        const auto toks = text::tokenize(all[ln]);
        if (toks.empty())
            continue;
        const auto& head = toks.front().text;
        std::size_t first_field = 1;
        std::string directive;
        std::string label;
        if (head == "mode" || head == "seg") {
            if (toks.size() < 2)
                throw ParseError("'" + head + "' needs a label", lineno, toks[0].column);
            label = toks[1].text;
            first_field = 2;
            directive = head == "mode" ? "mode" : label;
            if (head == "mode" && label != "A" && label != "B")
                throw ParseError("mode label must be A or B", lineno, toks[1].column);
            if (head == "seg" && label != "load" && label != "swap" && label != "delay" &&
                label != "readout")
                throw ParseError("unknown segment kind '" + label + "'", lineno, toks[1].column);
        } else if (head == "sim" || head == "coupler") {
            directive = head;
        } else {
            throw ParseError("unknown directive '" + head + "'", lineno, toks[0].column);
        }

        std::vector<Field> fields;
        std::set<std::string> seen;
        for (std::size_t i = first_field; i < toks.size(); ++i) {
            const auto& tok = toks[i];
            const auto eq = tok.text.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ParseError("expected key=value, got '" + tok.text + "'", lineno, tok.column);
            Field f{tok.text.substr(0, eq), tok.text.substr(eq + 1)};
            try {
                check_field(directive, f);
            } catch (const ValidationError& e) {
                throw ParseError(e.what(), lineno, tok.column);
            }
            if (!seen.insert(f.key).second)
                throw ParseError("duplicate key '" + f.key + "'", lineno, tok.column);
            fields.push_back(std::move(f));
        }

        if (head == "mode") {
            bool& have = label == "A" ? have_a : have_b;
            if (have)
                throw ParseError("mode " + label + " declared twice", lineno, toks[0].column);
            have = true;
            try {
                (label == "A" ? seq.modes_.a : seq.modes_.b) = mode_from_fields(fields);
            } catch (const ParseError&) {
                throw;
            } catch (const ValidationError& e) {
                throw ParseError(e.what(), lineno, toks[0].column);
            }
            (label == "A" ? seq.mode_a_fields_ : seq.mode_b_fields_) = std::move(fields);
        } else if (head == "sim") {
            if (have_sim)
                throw ParseError("sim declared twice", lineno, toks[0].column);
            have_sim = true;
            try {
                seq.sim_ = sim_from_fields(fields);
            } catch (const ValidationError& e) {
                throw ParseError(e.what(), lineno, toks[0].column);
            }
            seq.sim_fields_ = std::move(fields);
        } else if (head == "coupler") {
            if (have_coupler)
                throw ParseError("coupler declared twice", lineno, toks[0].column);
            have_coupler = true;
            seq.coupler_fields_ = std::move(fields);
        } else {
            raw_segments.emplace_back(segment_kind(label), std::move(fields));
        }
    }

    if (!have_a)
        seq.modes_.a = default_mode_a();
    if (!have_b)
        seq.modes_.b = default_mode_b();
    if (raw_segments.empty())
        throw ValidationError("empty sequence");

    for (std::size_t i = 0; i < raw_segments.size(); ++i) {
        try {
            seq.segments_.push_back(Segment::from_fields(raw_segments[i].first, std::move(raw_segments[i].second)));
        } catch (const ValidationError& e) {
            throw SequenceError(e.what(), i);
        }
    }

    const bool needs_flux = std::any_of(seq.segments_.begin(), seq.segments_.end(), [](const Segment& s) {
        return s.kind() == SegmentKind::swap && s.swap_spec().power_dbm.has_value();
    });
    if (have_coupler || needs_flux)
        seq.flux_ = flux_model_from_fields(seq.coupler_fields_, seq.modes_);
    return seq;
}

PulseSequence load_sequence(const std::string& path) { return parse_sequence(text::read_file(path)); }

namespace {

double segment_dt(const SimSettings& sim, const ModePair& modes, const PumpDrive& pump,
                  const DriveTone* drive, double scale) {
    if (sim.dt)
        return *sim.dt * scale;
    return std::min(1e-9, max_step(modes, pump, drive, sim.frame)) * scale;
}

// Incident amplitude that brings mode A from vacuum to `nbar` photons after a
// drive of length `dur` detuned by `detune` from the mode.
double load_amplitude(const ModeParams& a, double nbar, double dur, double detune) {
    if (a.gamma_ext() == 0.0)
        throw ValidationError("cannot drive a mode without a port");
    const double k = a.gamma_total() / 2;
    double response = 0.0;
    if (k == 0.0 && detune == 0.0) {
        response = dur;
    } else {
        const cplx num = std::polar(1.0, -detune * dur) - std::exp(-k * dur);
        response = std::abs(num / cplx(k, -detune));
    }
    if (!(response > 0))
        throw ValidationError("drive does not load the mode for this duration");
    return std::sqrt(nbar) / (std::sqrt(a.gamma_ext()) * response);
}

TraceRecord run_scaled(const PulseSequence& seq, const Amplitudes& initial, double scale,
                       std::size_t stride) {
    const auto& modes = seq.modes();
    const auto& sim = seq.sim();
    const double rest_pump = std::abs(modes.a.omega() - modes.b.omega());

    TraceRecord out;
    out.frame = sim.frame;
    out.omega_a = modes.a.omega();
    out.omega_b = modes.b.omega();

    Amplitudes x = initial;
    double t = initial.t;
    const auto& segs = seq.segments();
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const auto& s = segs[i];
        const double t1 = t + s.duration();
        PumpDrive pump{rest_pump, 0.0, Envelope{}};
        std::optional<DriveTone> drive;
        if (s.kind() == SegmentKind::swap) {
            const auto& w = s.swap_spec();
            double g = 0.0;
            if (w.g_p) {
                g = *w.g_p;
            } else {
                const auto rate = seq.flux_model().coupling_at_power(*w.power_dbm);
                g = rate.g_p;
            }
            pump = PumpDrive{pump_frequency_for(w.delta, modes.a, modes.b), w.phase,
                             Envelope::pulse(t, t1, g, w.ramp)};
        } else if (s.kind() == SegmentKind::load && s.load_spec().method == LoadMethod::drive) {
            const auto& l = s.load_spec();
            const double wd = l.omega_d.value_or(modes.a.omega());
            const double amp = l.amp_in ? *l.amp_in
                                        : load_amplitude(modes.a, *l.nbar, s.duration(), wd - modes.a.omega());
            // Phase referenced to the segment start so that the loaded state
            // does not depend on when the load happens.
            drive = DriveTone{wd, amp, l.phase + (sim.frame == Frame::lab ? wd : wd - modes.a.omega()) * t,
                              t, t1};
        }

        SimConfig cfg;
        cfg.frame = sim.frame;
        cfg.t_end = t1;
        cfg.record_stride = stride;
        cfg.dt = segment_dt(sim, modes, pump, drive ? &*drive : nullptr, scale);
        x.t = t;
        TraceRecord part;
        try {
            part = integrate(x, modes, pump, drive, cfg);
        } catch (const ResolutionError& e) {
            throw SequenceError(e.what(), i);
        }

        if (s.kind() == SegmentKind::load && s.load_spec().method == LoadMethod::direct) {
            const auto& l = s.load_spec();
            const double ph = l.phase - (sim.frame == Frame::lab ? modes.a.omega() * t1 : 0.0);
            auto& last = part.samples.back();
            last.a += std::polar(std::sqrt(*l.nbar), ph);
            last.a_out = -std::sqrt(modes.a.gamma_ext()) * last.a;
        }

        const auto& last = part.samples.back();
        x = Amplitudes{last.a, last.b, t1};
        const std::size_t skip = out.samples.empty() ? 0 : 1;
        out.samples.insert(out.samples.end(), part.samples.begin() + static_cast<std::ptrdiff_t>(skip),
                           part.samples.end());
        out.spans.push_back({std::to_string(i) + ":" + std::string(segment_kind_name(s.kind())), t, t1});
        if (i == 0)
            out.metadata = part.metadata;
        t = t1;
    }
    out.metadata.erase("omega_p_rad_s");
    out.metadata.erase("phi_p_rad");
    out.metadata.erase("g_p_peak_rad_s");
    out.metadata.erase("steps");
    out.metadata.erase("step_s");
    out.metadata["t_end_s"] = format_double(t);
    out.metadata["segments"] = std::to_string(segs.size());
    return out;
}

} // namespace

TraceRecord run_sequence(const PulseSequence& seq, const Amplitudes& initial) {
    if (seq.segments().empty())
        throw ValidationError("empty sequence");
    return run_scaled(seq, initial, 1.0, seq.sim().stride);
}

double half_step_deviation(const PulseSequence& seq, const Amplitudes& initial) {
    if (seq.segments().empty())
        throw ValidationError("empty sequence");
    const auto big = std::numeric_limits<std::size_t>::max();
    const auto x1 = run_scaled(seq, initial, 1.0, big).final_state();
    const auto x2 = run_scaled(seq, initial, 0.5, big).final_state();
    const double diff = std::sqrt(std::norm(x1.a - x2.a) + std::norm(x1.b - x2.b));
    const double scale = std::sqrt(x2.energy());
    return scale > 0 ? diff / scale : diff;
}

double calibrate_swap_time(const ModePair& modes, double g_p, double t_lo, double t_hi,
                           SwapDirection direction, double dt) {
    if (!(g_p > 0))
        throw ValidationError("swap calibration needs a positive coupling");
    if (!(t_lo >= 0 && t_hi > t_lo))
        throw ValidationError("swap calibration window must be a non-empty interval");
    const bool from_a = direction == SwapDirection::a_to_b;
    const PumpDrive pump{pump_frequency_for(0.0, modes.a, modes.b), 0.0, Envelope::constant(g_p)};
    const double step = std::min(dt, max_step(modes, pump, nullptr, Frame::rotating));

    auto residual = [&](double t) {
        if (t <= 0)
            return 1.0;
        Amplitudes x0{from_a ? cplx{1.0} : cplx{}, from_a ? cplx{} : cplx{1.0}, 0.0};
        SimConfig cfg;
        cfg.frame = Frame::rotating;
        cfg.dt = step;
        cfg.t_end = t;
        cfg.record_stride = std::numeric_limits<std::size_t>::max();
        const auto x = integrate(x0, modes, pump, std::nullopt, cfg).final_state();
        return std::norm(from_a ? x.a : x.b);
    };

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = t_lo;
    double b = t_hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = residual(c);
    double fd = residual(d);
    for (int it = 0; it < 200 && (b - a) > 1e-12 * t_hi; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = residual(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = residual(d);
        }
    }
    const double t_min = 0.5 * (a + b);
    const double edge = 1e-6 * (t_hi - t_lo);
    if (t_min - t_lo < edge || t_hi - t_min < edge)
        throw ValidationError("swap calibration window excludes the minimum");
    return t_min;
}

IQ demodulate(const TraceRecord& trace, double omega_ref, double t_start, double t_end) {
    if (!(t_end > t_start))
        throw ValidationError("demodulation window is empty");
    if (trace.samples.empty())
        throw ValidationError("empty trace");
    const double slack = 1e-9 * (t_end - t_start);
    if (t_start < trace.samples.front().t - slack || t_end > trace.samples.back().t + slack)
        throw ValidationError("demodulation window lies outside the trace");
    const double rate = trace.frame == Frame::lab ? omega_ref : omega_ref - trace.omega_a;

    IQ out;
    cplx acc{};
    const TraceSample* prev = nullptr;
    for (const auto& s : trace.samples) {
        if (s.t < t_start - slack || s.t > t_end + slack)
            continue;
        if (prev) {
            const double h = s.t - prev->t;
            const cplx f0 = prev->a_out * std::polar(1.0, rate * prev->t);
            const cplx f1 = s.a_out * std::polar(1.0, rate * s.t);
            acc += 0.5 * h * (f0 + f1);
            out.energy += 0.5 * h * (std::norm(prev->a_out) + std::norm(s.a_out));
        }
        prev = &s;
    }
    if (!prev)
        throw ValidationError("demodulation window contains no samples");
    out.i = acc.real();
    out.q = acc.imag();
    return out;
}

const TraceSpan& find_span(const TraceRecord& trace, std::string_view label) {
    for (const auto& s : trace.spans)
        if (s.label == label)
            return s;
    throw ValidationError("trace has no span '" + std::string(label) + "'");
}

} // namespace pfc
