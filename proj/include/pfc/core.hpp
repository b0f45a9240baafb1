// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared domain types. All rates and frequencies are angular (rad/s), all
// times in seconds, flux in units of the flux quantum. Amplitudes are
// normalized so that |a|^2 is the mean photon number.

#include <complex>
#include <optional>
#include <vector>

#include "pfc/errors.hpp"
#include "pfc/units.hpp"

namespace pfc {

using cplx = std::complex<double>;

/// One dissipative cavity mode.
class ModeParams {
public:
    ModeParams(double omega, double gamma_int, double gamma_ext);

    /// Infinite quality factors map to zero rates.
    static ModeParams from_q(double omega, double q_int, double q_ext);
    /// Total rate from an energy decay time; the internal share is
    /// `gamma_total - gamma_ext`.
    static ModeParams from_t1(double omega, double t1, double gamma_ext = 0.0);

    double omega() const noexcept { return omega_; }
    double gamma_int() const noexcept { return gamma_int_; }
    double gamma_ext() const noexcept { return gamma_ext_; }
    double gamma_total() const noexcept { return gamma_int_ + gamma_ext_; }
    /// Infinite for a lossless mode.
    double t1() const noexcept;
    double q_int() const noexcept;
    double q_ext() const noexcept;

    bool operator==(const ModeParams&) const = default;

private:
    double omega_;
    double gamma_int_;
    double gamma_ext_;
};

/// Readout (A) and storage (B) modes.
struct ModePair {
    ModeParams a;
    ModeParams b;
};

/// Flux bias state of the coupler. Flux values are wrapped into [0, 1).
class CouplerState {
public:
    CouplerState(double phi_dc, double delta_phi, double phi_offset = 0.0,
                 std::optional<double> omega_c_max = std::nullopt);

    double phi_dc() const noexcept { return phi_dc_; }
    double delta_phi() const noexcept { return delta_phi_; }
    double phi_offset() const noexcept { return phi_offset_; }
    std::optional<double> omega_c_max() const noexcept { return omega_c_max_; }

    CouplerState with_delta_phi(double delta_phi) const;

private:
    double phi_dc_;
    double delta_phi_;
    double phi_offset_;
    std::optional<double> omega_c_max_;
};

/// Wraps a flux value into [0, 1).
double wrap_flux(double phi);

/// Pump coupling envelope g_P(t): a set of non-overlapping pulses, each flat
/// at `amplitude` with optional raised-cosine edges of length `ramp`.
class Envelope {
public:
    struct Pulse {
        double t_on;
        double t_off;
        double amplitude;
        double ramp = 0.0;
    };

    Envelope() = default;
    explicit Envelope(std::vector<Pulse> pulses);

    /// Always on at `amplitude`.
    static Envelope constant(double amplitude);
    static Envelope pulse(double t_on, double t_off, double amplitude, double ramp = 0.0);

    double operator()(double t) const noexcept;
    double peak() const noexcept;
    bool is_constant() const noexcept { return constant_; }
    const std::vector<Pulse>& pulses() const noexcept { return pulses_; }

private:
    std::vector<Pulse> pulses_;
    bool constant_ = false;
};

/// Pump tone at the coupler.
struct PumpDrive {
    double omega_p = 0.0;
    double phi_p = 0.0;
    Envelope envelope;

    /// g_P(t) e^{i phi_P}, without the carrier.
    cplx coupling(double t) const noexcept { return std::polar(envelope(t), phi_p); }
};

/// Complex amplitudes of both modes at time t.
struct Amplitudes {
    cplx a{};
    cplx b{};
    double t = 0.0;

    double energy() const noexcept { return std::norm(a) + std::norm(b); }
};

/// Pump detuning from the difference frequency, omega_P - |omega_A - omega_B|.
double detuning(const PumpDrive& pump, const ModeParams& mode_a, const ModeParams& mode_b) noexcept;

/// Pump frequency that gives the requested detuning.
double pump_frequency_for(double delta, const ModeParams& mode_a, const ModeParams& mode_b) noexcept;

} // namespace pfc
