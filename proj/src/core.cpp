// SPDX-License-Identifier: Apache-2.0
#include "pfc/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace pfc {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

void require(bool cond, const char* what) {
    if (!cond)
        throw ValidationError(what);
}

double rate_from_q(double omega, double q, const char* name) {
    if (std::isinf(q) && q > 0)
        return 0.0;
    if (!(q > 0) || !std::isfinite(q))
        throw ValidationError(std::string(name) + " must be positive or infinite");
    return omega / q;
}

} // namespace

ParseError::ParseError(const std::string& what, std::size_t line, std::size_t column)
    : ValidationError(what + " (line " + std::to_string(line) +
                      (column ? ", column " + std::to_string(column) : std::string{}) + ")"),
      line_(line), column_(column) {}

SequenceError::SequenceError(const std::string& what, std::size_t segment)
    : ValidationError("segment " + std::to_string(segment) + ": " + what), segment_(segment) {}

ModeParams::ModeParams(double omega, double gamma_int, double gamma_ext)
    : omega_(omega), gamma_int_(gamma_int), gamma_ext_(gamma_ext) {
    require(std::isfinite(omega) && omega > 0, "mode frequency must be positive");
    require(std::isfinite(gamma_int) && gamma_int >= 0, "internal dissipation rate must be non-negative");
    require(std::isfinite(gamma_ext) && gamma_ext >= 0, "external dissipation rate must be non-negative");
}

ModeParams ModeParams::from_q(double omega, double q_int, double q_ext) {
    require(std::isfinite(omega) && omega > 0, "mode frequency must be positive");
    return ModeParams(omega, rate_from_q(omega, q_int, "q_int"), rate_from_q(omega, q_ext, "q_ext"));
}

ModeParams ModeParams::from_t1(double omega, double t1, double gamma_ext) {
    require(std::isfinite(t1) && t1 > 0, "t1 must be positive");
    const double total = 1.0 / t1;
    require(gamma_ext <= total, "external rate exceeds the total rate implied by t1");
    return ModeParams(omega, total - gamma_ext, gamma_ext);
}

double ModeParams::t1() const noexcept {
    const double g = gamma_total();
    return g > 0 ? 1.0 / g : inf;
}

double ModeParams::q_int() const noexcept { return gamma_int_ > 0 ? omega_ / gamma_int_ : inf; }
double ModeParams::q_ext() const noexcept { return gamma_ext_ > 0 ? omega_ / gamma_ext_ : inf; }

double wrap_flux(double phi) {
    require(std::isfinite(phi), "flux must be finite");
    double w = phi - std::floor(phi);
    return w >= 1.0 ? 0.0 : w;
}

CouplerState::CouplerState(double phi_dc, double delta_phi, double phi_offset,
                           std::optional<double> omega_c_max)
    : phi_dc_(wrap_flux(phi_dc)), delta_phi_(delta_phi), phi_offset_(wrap_flux(phi_offset)),
      omega_c_max_(omega_c_max) {
    require(std::isfinite(delta_phi) && delta_phi >= 0, "pump flux amplitude must be non-negative");
    if (omega_c_max)
        require(std::isfinite(*omega_c_max) && *omega_c_max > 0,
                "coupler maximum frequency must be positive");
}

CouplerState CouplerState::with_delta_phi(double delta_phi) const {
    return CouplerState(phi_dc_, delta_phi, phi_offset_, omega_c_max_);
}

Envelope::Envelope(std::vector<Pulse> pulses) : pulses_(std::move(pulses)) {
    std::sort(pulses_.begin(), pulses_.end(),
              [](const Pulse& l, const Pulse& r) { return l.t_on < r.t_on; });
    for (std::size_t i = 0; i < pulses_.size(); ++i) {
        const auto& p = pulses_[i];
        require(std::isfinite(p.t_on) && std::isfinite(p.t_off) && p.t_off > p.t_on,
                "pulse support must be a finite, non-empty interval");
        require(std::isfinite(p.amplitude) && p.amplitude >= 0, "envelope amplitude must be non-negative");
        require(p.ramp >= 0 && 2.0 * p.ramp <= p.t_off - p.t_on, "pulse ramp longer than half the pulse");
        if (i > 0)
            require(p.t_on >= pulses_[i - 1].t_off, "pump pulses overlap");
    }
}

Envelope Envelope::constant(double amplitude) {
    require(std::isfinite(amplitude) && amplitude >= 0, "envelope amplitude must be non-negative");
    Envelope e;
    e.pulses_.push_back({-inf, inf, amplitude, 0.0});
    e.constant_ = true;
    return e;
}

Envelope Envelope::pulse(double t_on, double t_off, double amplitude, double ramp) {
    return Envelope({{t_on, t_off, amplitude, ramp}});
}

double Envelope::operator()(double t) const noexcept {
    if (constant_)
        return pulses_.front().amplitude;
    for (const auto& p : pulses_) {
        if (t < p.t_on)
            return 0.0;
        if (t > p.t_off)
            continue;
        if (p.ramp > 0) {
            const double rise = t - p.t_on;
            const double fall = p.t_off - t;
            const double edge = std::min(rise, fall);
            if (edge < p.ramp)
                return p.amplitude * 0.5 * (1.0 - std::cos(std::numbers::pi * edge / p.ramp));
        }
        return p.amplitude;
    }
    return 0.0;
}

double Envelope::peak() const noexcept {
    double m = 0.0;
    for (const auto& p : pulses_)
        m = std::max(m, p.amplitude);
    return m;
}

double detuning(const PumpDrive& pump, const ModeParams& mode_a, const ModeParams& mode_b) noexcept {
    return pump.omega_p - std::abs(mode_a.omega() - mode_b.omega());
}

double pump_frequency_for(double delta, const ModeParams& mode_a, const ModeParams& mode_b) noexcept {
    return std::abs(mode_a.omega() - mode_b.omega()) + delta;
}

} // namespace pfc
