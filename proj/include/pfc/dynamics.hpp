// SPDX-License-Identifier: Apache-2.0
#pragma once

// Coupled-mode equations of motion for the readout (A) and storage (B)
// modes, in the lab frame or in a frame where each mode rotates at its own
// natural frequency.
//
// Lab frame:
//   da/dt = -i(omega_A - i gamma_A/2) a - i g(t) e^{+i(omega_P t + phi_P)} b + sqrt(gamma_ext,A) a_in(t)
//   db/dt = -i(omega_B - i gamma_B/2) b - i g(t) e^{-i(omega_P t + phi_P)} a
// Rotating frame (a = a~ e^{-i omega_A t}, b = b~ e^{-i omega_B t}):
//   da~/dt = -(gamma_A/2) a~ - i g(t) e^{+i(Delta t + phi_P)} b~ + drive
//   db~/dt = -(gamma_B/2) b~ - i g(t) e^{-i(Delta t + phi_P)} a~
// Only mode A has a port. Output field: a_out = a_in - sqrt(gamma_ext,A) a.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pfc/core.hpp"

namespace pfc {

enum class Frame { lab, rotating };

std::string_view frame_name(Frame f) noexcept;

/// Coherent drive incident on the A port: a_in(t) = amp_in e^{i phase} e^{-i omega_d t}
/// for t in [t_on, t_off].
struct DriveTone {
    double omega_d = 0.0;
    double amp_in = 0.0;  ///< sqrt(photons / s)
    double phase = 0.0;
    double t_on = 0.0;
    double t_off = 0.0;

    void validate() const;
    /// Incident field in the given frame; zero outside the support.
    cplx incident(double t, Frame frame, double omega_a) const noexcept;
};

struct SimConfig {
    Frame frame = Frame::rotating;
    double dt = 1e-9;
    double t_end = 0.0;            ///< absolute end time of the integration
    std::size_t record_stride = 1;
    double tolerance = 1e-8;       ///< relative target for the half-step check

    void validate() const;
};

struct TraceSample {
    double t;
    cplx a;
    cplx b;
    cplx a_out;
};

/// Named time interval of a trace, e.g. one pulse-sequence segment.
struct TraceSpan {
    std::string label;
    double t_start;
    double t_end;
};

/// Sampled trajectory plus what is needed to interpret it.
struct TraceRecord {
    Frame frame = Frame::rotating;
    double omega_a = 0.0;  ///< rotation rate of mode A in the rotating frame
    double omega_b = 0.0;
    std::vector<TraceSample> samples;
    std::vector<TraceSpan> spans;
    std::map<std::string, std::string> metadata;

    /// Columns t_s, re_a, im_a, re_b, im_b, re_aout, im_aout.
    std::string to_csv() const;
    /// Flat `key = value` lines.
    std::string metadata_text() const;
    Amplitudes final_state() const;
};

/// Right-hand side of the equations of motion. `coupling` is the complex
/// coupling g(t) e^{i phi_P} without the carrier.
Amplitudes derivative(const Amplitudes& state, double t, const ModePair& modes,
                      cplx coupling, double omega_p, const DriveTone* drive, Frame frame);

Amplitudes derivative(const Amplitudes& state, double t, const ModePair& modes,
                      const PumpDrive& pump, const DriveTone* drive, Frame frame);

/// Step limit for the frame: the fastest rate must be sampled 50 times per period.
double max_step(const ModePair& modes, const PumpDrive& pump, const DriveTone* drive, Frame frame);

/// Fixed-step classical RK4 from `initial.t` to `config.t_end`. The step is
/// the largest value not exceeding `config.dt` that divides the interval
/// evenly. Throws ResolutionError when `config.dt` exceeds `max_step`, and
/// ConvergenceError on a non-finite state.
TraceRecord integrate(const Amplitudes& initial, const ModePair& modes, const PumpDrive& pump,
                      const std::optional<DriveTone>& drive, const SimConfig& config);

/// Largest relative disagreement between the final states obtained with
/// `config.dt` and `config.dt / 2`.
double half_step_deviation(const Amplitudes& initial, const ModePair& modes, const PumpDrive& pump,
                           const std::optional<DriveTone>& drive, const SimConfig& config);

/// Energy-oscillation angular frequency of the lossless detuned two-mode
/// system, sqrt(Delta^2 + 4 g^2).
double rabi_frequency(double delta, double g_p) noexcept;

/// Steady-state reflection coefficient of port A under a weak CW probe at
/// each `probe_omegas` (lab-frame angular frequency). The pump envelope must
/// be constant.
std::vector<cplx> reflection_spectrum(const ModeParams& mode_a, const ModeParams& mode_b,
                                      const PumpDrive& pump, const std::vector<double>& probe_omegas);

} // namespace pfc
