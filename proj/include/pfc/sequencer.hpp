// SPDX-License-Identifier: Apache-2.0
#pragma once

// Timed pulse sequences (load, swap, delay, readout) and their line-oriented
// text format:
//
//   mode A freq=8.70GHz gamma=170kHz q_int=900e3
//   mode B freq=9.33GHz t1=14.9us
//   sim dt=1ns stride=10 frame=rotating
//   coupler bias=0.3 calib=7.96
//   seg load dur=20us nbar=10
//   seg swap dur=0.6us gp=1.2MHz delta=0Hz phase=0deg
//   seg delay dur=5us
//   seg swap dur=0.6us gp=1.2MHz delta=0Hz phase=90deg
//   seg readout dur=5us
//
// Dimensioned values require a unit (GHz, MHz, kHz, Hz, us, ns, s, deg, rad,
// dBm); dimensionless ones (quality factors, photon numbers, flux in flux
// quanta, strides) are bare numbers. `#` starts a comment.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pfc/dynamics.hpp"
#include "pfc/flux.hpp"

namespace pfc {

/// One `key=value` pair exactly as written.
struct Field {
    std::string key;
    std::string raw;

    bool operator==(const Field&) const = default;
};

enum class SegmentKind { load, swap, delay, readout };
enum class LoadMethod { drive, direct };

std::string_view segment_kind_name(SegmentKind k) noexcept;

struct LoadSpec {
    std::optional<double> nbar;
    std::optional<double> amp_in;   ///< sqrt(photons / s)
    std::optional<double> omega_d;  ///< defaults to omega_A
    double phase = 0.0;
    LoadMethod method = LoadMethod::drive;
};

struct SwapSpec {
    std::optional<double> g_p;
    std::optional<double> power_dbm;
    double delta = 0.0;
    double phase = 0.0;
    double ramp = 0.0;
};

class Segment {
public:
    /// Validates the fields for `kind`; throws ValidationError.
    static Segment from_fields(SegmentKind kind, std::vector<Field> fields);

    static Segment load(double duration, double nbar, LoadMethod method = LoadMethod::drive);
    static Segment swap(double duration, double g_p, double delta = 0.0, double phase = 0.0,
                        double ramp = 0.0);
    static Segment swap_at_power(double duration, double power_dbm, double delta = 0.0,
                                 double phase = 0.0);
    static Segment delay(double duration);
    static Segment readout(double duration);

    SegmentKind kind() const noexcept { return kind_; }
    double duration() const noexcept { return duration_; }
    const LoadSpec& load_spec() const noexcept { return load_; }
    const SwapSpec& swap_spec() const noexcept { return swap_; }
    const std::vector<Field>& fields() const noexcept { return fields_; }

    std::string emit() const;

private:
    SegmentKind kind_ = SegmentKind::delay;
    double duration_ = 0.0;
    LoadSpec load_;
    SwapSpec swap_;
    std::vector<Field> fields_;
};

/// Integrator settings of a sequence. A missing step means "1 ns, or the
/// frame's resolution limit when that is finer".
struct SimSettings {
    std::optional<double> dt;
    std::size_t stride = 1;
    Frame frame = Frame::rotating;
};

class PulseSequence {
public:
    PulseSequence() = default;
    PulseSequence(ModePair modes, std::vector<Segment> segments);

    const ModePair& modes() const noexcept { return modes_; }
    const std::vector<Segment>& segments() const noexcept { return segments_; }
    const SimSettings& sim() const noexcept { return sim_; }
    /// Flux model used for swaps that specify a pump power.
    const FluxModel& flux_model() const;

    PulseSequence& set_sim(SimSettings sim);
    PulseSequence& set_flux_model(FluxModel model);
    PulseSequence& add(Segment s);

    double total_duration() const noexcept;

    /// Canonical text form; `parse_sequence(emit())` reproduces this sequence.
    std::string emit() const;

private:
    friend PulseSequence parse_sequence(std::string_view text);

    ModePair modes_{ModeParams(1.0, 0.0, 0.0), ModeParams(1.0, 0.0, 0.0)};
    std::vector<Field> mode_a_fields_;
    std::vector<Field> mode_b_fields_;
    std::vector<Field> sim_fields_;
    std::vector<Field> coupler_fields_;
    std::optional<FluxModel> flux_;
    SimSettings sim_;
    std::vector<Segment> segments_;
};

/// Paper-default readout mode: 8.70 GHz, gamma = 2 pi 170 kHz, Q_int = 9e5.
ModeParams default_mode_a();
/// Paper-default storage mode: 9.33 GHz, T1 = 14.9 us, no port.
ModeParams default_mode_b();

/// Builds mode parameters from `freq` and any consistent combination of
/// `q_int`, `q_ext`, `gamma` (total linewidth) and `t1`.
ModeParams mode_from_fields(const std::vector<Field>& fields);

/// Calibrated flux model with `coupler` directive overrides applied.
FluxModel flux_model_from_fields(const std::vector<Field>& fields, const ModePair& modes);

/// Throws ParseError on syntax errors and SequenceError on invalid segments.
PulseSequence parse_sequence(std::string_view text);
PulseSequence load_sequence(const std::string& path);

/// Integrates the sequence segment by segment. The pump oscillator runs
/// continuously, so a swap's phase is relative to a fixed reference and the
/// phase difference between two swaps is well defined across a delay. The
/// trace carries one span per segment, labelled "<index>:<kind>".
TraceRecord run_sequence(const PulseSequence& seq, const Amplitudes& initial = {});

/// Relative disagreement of the final state between the sequence's step and
/// half of it.
double half_step_deviation(const PulseSequence& seq, const Amplitudes& initial = {});

enum class SwapDirection { a_to_b, b_to_a };

/// Pulse length at Delta = 0 that minimizes the energy left in the source
/// mode after one rectangular swap, found by golden-section search inside
/// [t_lo, t_hi]. Throws ValidationError when the minimum lies on the window
/// edge.
double calibrate_swap_time(const ModePair& modes, double g_p, double t_lo, double t_hi,
                           SwapDirection direction = SwapDirection::a_to_b, double dt = 1e-9);

struct IQ {
    double i = 0.0;
    double q = 0.0;
    double energy = 0.0;  ///< integral of |a_out|^2

    cplx value() const noexcept { return {i, q}; }
};

/// I + iQ = integral of a_out(t) e^{+i omega_ref t} over the window (lab
/// frame); in the rotating frame the trace is already rotated by omega_A.
IQ demodulate(const TraceRecord& trace, double omega_ref, double t_start, double t_end);

/// Span of a trace by label; throws ValidationError when absent.
const TraceSpan& find_span(const TraceRecord& trace, std::string_view label);

} // namespace pfc
