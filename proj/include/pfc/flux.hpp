// SPDX-License-Identifier: Apache-2.0
#pragma once

// Flux dependence of the cavity frequencies and the parametric coupling rate
// produced by a flux pump of given amplitude.

#include <filesystem>
#include <memory>
#include <string_view>
#include <vector>

#include "pfc/core.hpp"

namespace pfc {

/// Map from DC flux (in flux quanta) to a mode frequency, periodic in one
/// flux quantum.
///
/// Two kinds are supported:
///  - `coupler_model`: the mode is pulled by a flux-tuned coupler
///    resonance sitting below it,
///    `omega(phi) = omega_bare + kappa_pull / (omega_bare^2 - omega_c(phi)^2)`,
///    `omega_c(phi) = omega_c_max * sqrt(|cos(pi (phi - phi_offset))|)`.
///  - `tabulated`: measured (phi, omega) samples joined by a periodic cubic
///    spline.
class FluxCurve {
public:
    enum class Kind { tabulated, coupler_model };

    struct Sample {
        double phi;
        double omega;
    };

    static FluxCurve coupler_model(double omega_bare, double kappa_pull, double omega_c_max,
                                   double phi_offset = 0.0);
    /// Samples must be strictly increasing in phi, span less than one period,
    /// and number at least four.
    static FluxCurve tabulated(std::vector<Sample> samples);
    /// Two columns (flux in flux quanta, frequency in Hz), whitespace or comma
    /// separated. `#` starts a comment; a non-numeric first line is a header.
    static FluxCurve parse_table(std::string_view text);
    static FluxCurve load_table(const std::filesystem::path& path);

    Kind kind() const noexcept { return kind_; }

    double omega_at(double phi) const;
    /// d(omega)/d(phi) in rad/s per flux quantum.
    double slope_at(double phi) const;

    double omega_bare() const noexcept { return omega_bare_; }
    double kappa_pull() const noexcept { return kappa_pull_; }
    double omega_c_max() const noexcept { return omega_c_max_; }
    double phi_offset() const noexcept { return phi_offset_; }

    FluxCurve with_kappa_pull(double kappa_pull) const;

private:
    struct Spline;

    FluxCurve() = default;

    Kind kind_ = Kind::coupler_model;
    double omega_bare_ = 0.0;
    double kappa_pull_ = 0.0;
    double omega_c_max_ = 0.0;
    double phi_offset_ = 0.0;
    std::shared_ptr<const Spline> spline_;
};

struct CouplingRate {
    double g_p = 0.0;
    /// Set when either slope vanishes at the bias point.
    bool degenerate = false;
};

/// g_P = (delta_phi / 4) sqrt(|d omega_A/d phi * d omega_B/d phi|) at the bias point.
CouplingRate coupling_rate(const FluxCurve& curve_a, const FluxCurve& curve_b,
                           const CouplerState& state);

/// Pump flux amplitude for a pump power, linear in the pump amplitude.
double pump_power_to_flux(double p_dbm, double calib);
/// Calibration scalar that maps `p_dbm` to `delta_phi`.
double flux_calibration_for(double p_dbm, double delta_phi);

/// Targets for the default coupler-model calibration.
struct FluxCalibrationTargets {
    double modulation_a = angular(4e6);   ///< peak-to-peak of omega_A over half a period
    double coupling = angular(1.2e6);     ///< g_P at the reference pump amplitude
    double delta_phi_ref = 0.2;
    double power_ref_dbm = -52.0;
    double omega_c_max = angular(7.7e9);
    double phi_offset = 0.0;
};

/// Calibrated pair of coupler-model curves plus the bias point and pump-power
/// calibration that go with them.
struct FluxModel {
    FluxCurve curve_a;
    FluxCurve curve_b;
    CouplerState coupler;
    double power_calib;

    CouplingRate coupling_at_power(double p_dbm) const;
};

/// Builds coupler-model curves for the two modes: kappa_pull of A is set by
/// bisection to the requested modulation depth, the bias is placed at the
/// maximum of |slope_A * slope_B|, and kappa_pull of B is set by bisection so
/// that the reference pump amplitude gives the target coupling rate.
FluxModel calibrate_flux_model(double omega_a, double omega_b,
                               const FluxCalibrationTargets& targets = {});

} // namespace pfc
