// SPDX-License-Identifier: Apache-2.0
#pragma once

// Extraction of oscillation frequencies, decay constants, efficiencies and
// phase response from simulated traces. All fits are deterministic.

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pfc/dynamics.hpp"

namespace pfc {

struct FitResult {
    std::vector<std::pair<std::string, double>> params;
    double residual_rms = 0.0;
    /// Linearized parameter covariance, same order as `params`; empty when
    /// unavailable.
    std::vector<std::vector<double>> covariance;
    bool degenerate = false;

    double param(std::string_view name) const;
    /// Flat `prefix.key = value` lines.
    std::string to_text(std::string_view prefix) const;
};

class FitConvergenceError : public ConvergenceError {
public:
    FitConvergenceError(const std::string& what, FitResult last)
        : ConvergenceError(what), last_(std::move(last)) {}

    const FitResult& last_iterate() const noexcept { return last_; }

private:
    FitResult last_;
};

/// The series carries no oscillation (constant after detrending).
class NoOscillationError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

struct Point {
    double x;
    double y;
};

/// Dominant angular frequency of a uniformly sampled series. The series is
/// detrended (mean and linear ramp), Hann windowed and zero padded 8x; the
/// largest bin beyond the falling edge of the zero-frequency lobe is refined
/// by a parabola through it and its neighbours.
double oscillation_frequency(std::span<const double> series, double dt);

/// Least-squares fit of A exp(-t/tau) + c (params "amplitude", "tau",
/// "offset"). Starts from a log-linear fit and refines by Gauss-Newton with
/// step halving, at most 100 iterations, relative step tolerance 1e-10.
/// A constant series gives tau = inf with `degenerate` set.
FitResult fit_exponential_decay(std::span<const Point> points);

/// retrieved / reference.
double efficiency(double retrieved, double reference);

/// Occupancy-weighted dwell times, integral of |a|^2/(|a|^2+|b|^2) dt and of
/// the B share, over [t_start, t_end].
struct DwellTimes {
    double a = 0.0;
    double b = 0.0;
};

DwellTimes occupancy_dwell(const TraceRecord& trace, double t_start, double t_end);

/// eta / exp(-gamma_A t_A - gamma_B t_B).
double loss_corrected_efficiency(double eta, const ModePair& modes, const DwellTimes& dwell);

/// Dwell windows taken from a storage-and-retrieval trace: mode A from the
/// end of loading up to the start of the final (retrieval) swap, where the
/// leaked field starts counting as retrieved; mode B up to the end of that
/// swap.
double loss_corrected_efficiency(double eta, const TraceRecord& trace, const ModePair& modes);

/// Line through unwrapped phases vs. pump phase ("slope", "intercept").
/// Needs at least 3 points spanning at least pi.
FitResult fit_phase_slope(std::span<const Point> points);

/// Ordinary least squares line ("slope", "intercept", "r_squared").
FitResult fit_line(std::span<const Point> points);

/// Fit of sqrt(Delta^2 + 4 g^2) to (Delta, Omega) points ("g_p"). The
/// residual is the relative RMS deviation.
FitResult fit_chevron(std::span<const Point> points);

/// Relative RMS of Omega against sqrt(Delta^2 + 4 g^2) for a given g.
double chevron_relative_rms(std::span<const Point> points, double g_p);

/// Local minima of y(x), refined by parabolic interpolation, sorted by depth
/// (deepest first).
std::vector<Point> local_minima(std::span<const Point> curve);

/// Signed area of a closed polygon (shoelace).
double polygon_area(std::span<const cplx> vertices);

} // namespace pfc
