// SPDX-License-Identifier: Apache-2.0
#include "pfc/flux.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

namespace pfc {

// Periodic cubic spline over one flux period. Values are stored relative to
// the first sample to keep the solve well conditioned.
struct FluxCurve::Spline {
    std::vector<double> x; // n + 1 knots, x[n] = x[0] + 1
    std::vector<double> y; // relative to base
    std::vector<double> m; // second derivatives, m[n] = m[0]
    double base = 0.0;

    // Returns the interval index and the position mapped into [x0, x0 + 1).
    std::pair<std::size_t, double> locate(double phi) const {
        double u = phi - x.front();
        u -= std::floor(u);
        const double p = x.front() + u;
        auto it = std::upper_bound(x.begin(), x.end(), p);
        auto i = static_cast<std::size_t>(std::distance(x.begin(), it));
        i = std::clamp<std::size_t>(i, 1, x.size() - 1) - 1;
        return {i, p};
    }

    double value(double phi) const {
        const auto [i, p] = locate(phi);
        const double h = x[i + 1] - x[i];
        const double l = x[i + 1] - p;
        const double r = p - x[i];
        return base + m[i] * l * l * l / (6 * h) + m[i + 1] * r * r * r / (6 * h) +
               (y[i] / h - m[i] * h / 6) * l + (y[i + 1] / h - m[i + 1] * h / 6) * r;
    }

    double derivative(double phi) const {
        const auto [i, p] = locate(phi);
        const double h = x[i + 1] - x[i];
        const double l = x[i + 1] - p;
        const double r = p - x[i];
        return -m[i] * l * l / (2 * h) + m[i + 1] * r * r / (2 * h) - (y[i] / h - m[i] * h / 6) +
               (y[i + 1] / h - m[i + 1] * h / 6);
    }
};

namespace {

// cos(pi x) written so that x = 1/2 gives exactly zero.
double cos_pi(double x) { return std::sin(std::numbers::pi * (0.5 - x)); }

double sign(double v) { return (v > 0) - (v < 0); }

} // namespace

FluxCurve FluxCurve::coupler_model(double omega_bare, double kappa_pull, double omega_c_max,
                                   double phi_offset) {
    if (!(std::isfinite(omega_bare) && omega_bare > 0))
        throw ValidationError("bare mode frequency must be positive");
    if (!(std::isfinite(omega_c_max) && omega_c_max > 0))
        throw ValidationError("coupler maximum frequency must be positive");
    if (!(omega_c_max < omega_bare))
        throw ValidationError("coupler resonance must stay below the cavity mode");
    if (!std::isfinite(kappa_pull))
        throw ValidationError("pull strength must be finite");
    FluxCurve c;
    c.kind_ = Kind::coupler_model;
    c.omega_bare_ = omega_bare;
    c.kappa_pull_ = kappa_pull;
    c.omega_c_max_ = omega_c_max;
    c.phi_offset_ = wrap_flux(phi_offset);
    return c;
}

FluxCurve FluxCurve::with_kappa_pull(double kappa_pull) const {
    if (kind_ != Kind::coupler_model)
        throw ValidationError("pull strength applies to coupler-model curves only");
    return coupler_model(omega_bare_, kappa_pull, omega_c_max_, phi_offset_);
}

FluxCurve FluxCurve::tabulated(std::vector<Sample> samples) {
    const std::size_t n = samples.size();
    if (n < 4)
        throw ValidationError("tabulated flux curve needs at least 4 samples");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(samples[i].phi) || !std::isfinite(samples[i].omega))
            throw ValidationError("tabulated flux curve has non-finite samples");
        if (i > 0 && !(samples[i].phi > samples[i - 1].phi))
            throw ValidationError("tabulated flux samples must be strictly increasing");
    }
    if (!(samples.back().phi - samples.front().phi < 1.0))
        throw ValidationError("tabulated flux samples must lie within one flux period");

    auto s = std::make_shared<Spline>();
    s->base = samples.front().omega;
    for (const auto& p : samples) {
        s->x.push_back(p.phi);
        s->y.push_back(p.omega - s->base);
    }
    s->x.push_back(samples.front().phi + 1.0);
    s->y.push_back(0.0);

    std::vector<double> h(n);
    for (std::size_t i = 0; i < n; ++i)
        h[i] = s->x[i + 1] - s->x[i];

    Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<Eigen::Triplet<double>> t;
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t prev = (i + n - 1) % n;
        const std::size_t next = (i + 1) % n;
        const double hp = h[prev];
        const double hi = h[i];
        const auto r = static_cast<Eigen::Index>(i);
        t.emplace_back(r, static_cast<Eigen::Index>(prev), hp);
        t.emplace_back(r, r, 2.0 * (hp + hi));
        t.emplace_back(r, static_cast<Eigen::Index>(next), hi);
        rhs(r) = 6.0 * ((s->y[i + 1] - s->y[i]) / hi - (s->y[i] - s->y[prev]) / hp);
    }
    A.setFromTriplets(t.begin(), t.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
        throw ValidationError("periodic spline system is singular");
    Eigen::VectorXd m = lu.solve(rhs);
    s->m.assign(m.data(), m.data() + n);
    s->m.push_back(s->m.front());

    FluxCurve c;
    c.kind_ = Kind::tabulated;
    c.spline_ = std::move(s);
    return c;
}

FluxCurve FluxCurve::parse_table(std::string_view text) {
    std::vector<Sample> samples;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    bool seen_data = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        std::string c0, c1, extra;
        if (!(fields >> c0))
            continue;
        if (!(fields >> c1) || (fields >> extra))
            throw ParseError("expected two columns", lineno);
        double phi = 0.0;
        double hz = 0.0;
        auto r0 = std::from_chars(c0.data(), c0.data() + c0.size(), phi);
        auto r1 = std::from_chars(c1.data(), c1.data() + c1.size(), hz);
        const bool ok = r0.ec == std::errc{} && r0.ptr == c0.data() + c0.size() &&
                        r1.ec == std::errc{} && r1.ptr == c1.data() + c1.size();
        if (!ok) {
            if (!seen_data)
                continue; // header line
            throw ParseError("malformed flux table row", lineno);
        }
        seen_data = true;
        samples.push_back({phi, angular(hz)});
    }
    return tabulated(std::move(samples));
}

FluxCurve FluxCurve::load_table(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f)
        throw ValidationError("cannot open flux table " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_table(ss.str());
}

double FluxCurve::omega_at(double phi) const {
    if (!std::isfinite(phi))
        throw ValidationError("flux must be finite");
    if (kind_ == Kind::tabulated)
        return spline_->value(phi);
    const double c = std::abs(cos_pi(wrap_flux(phi - phi_offset_)));
    const double wc2 = omega_c_max_ * omega_c_max_ * c;
    return omega_bare_ + kappa_pull_ / (omega_bare_ * omega_bare_ - wc2);
}

double FluxCurve::slope_at(double phi) const {
    if (!std::isfinite(phi))
        throw ValidationError("flux must be finite");
    if (kind_ == Kind::tabulated)
        return spline_->derivative(phi);
    const double x = wrap_flux(phi - phi_offset_);
    const double cs = cos_pi(x);
    const double wc2 = omega_c_max_ * omega_c_max_ * std::abs(cs);
    const double dwc2 = -omega_c_max_ * omega_c_max_ * sign(cs) * std::numbers::pi *
                        std::sin(std::numbers::pi * x);
    const double den = omega_bare_ * omega_bare_ - wc2;
    return kappa_pull_ * dwc2 / (den * den);
}

CouplingRate coupling_rate(const FluxCurve& curve_a, const FluxCurve& curve_b,
                           const CouplerState& state) {
    const double sa = curve_a.slope_at(state.phi_dc());
    const double sb = curve_b.slope_at(state.phi_dc());
    CouplingRate r;
    if (sa == 0.0 || sb == 0.0) {
        r.degenerate = true;
        return r;
    }
    r.g_p = state.delta_phi() / 4.0 * std::sqrt(std::abs(sa * sb));
    return r;
}

double pump_power_to_flux(double p_dbm, double calib) {
    if (!(calib > 0) || !std::isfinite(calib))
        throw ValidationError("pump flux calibration must be positive");
    if (std::isnan(p_dbm))
        throw ValidationError("pump power must not be NaN");
    if (std::isinf(p_dbm) && p_dbm < 0)
        return 0.0;
    return calib * std::sqrt(std::pow(10.0, p_dbm / 10.0));
}

double flux_calibration_for(double p_dbm, double delta_phi) {
    if (!std::isfinite(p_dbm) || !(delta_phi > 0))
        throw ValidationError("flux calibration needs a finite power and a positive flux amplitude");
    return delta_phi / std::sqrt(std::pow(10.0, p_dbm / 10.0));
}

CouplingRate FluxModel::coupling_at_power(double p_dbm) const {
    return coupling_rate(curve_a, curve_b,
                         coupler.with_delta_phi(pump_power_to_flux(p_dbm, power_calib)));
}

namespace {

double modulation_depth(const FluxCurve& c) {
    return std::abs(c.omega_at(c.phi_offset()) - c.omega_at(c.phi_offset() + 0.5));
}

// Finds kappa in (0, inf) with f(kappa) = target for f increasing from 0.
template <class F>
double solve_increasing(F f, double target, double kappa_guess) {
    double hi = kappa_guess;
    int grow = 0;
    while (f(hi) < target) {
        hi *= 2.0;
        if (++grow > 200)
            throw ValidationError("flux calibration target unreachable");
    }
    double lo = 0.0;
    boost::math::tools::eps_tolerance<double> tol(50);
    auto [a, b] = boost::math::tools::bisect([&](double k) { return f(k) - target; }, lo, hi, tol);
    return 0.5 * (a + b);
}

} // namespace

FluxModel calibrate_flux_model(double omega_a, double omega_b, const FluxCalibrationTargets& targets) {
    if (!(targets.modulation_a > 0) || !(targets.coupling > 0) || !(targets.delta_phi_ref > 0))
        throw ValidationError("flux calibration targets must be positive");

    auto base_a = FluxCurve::coupler_model(omega_a, 0.0, targets.omega_c_max, targets.phi_offset);
    auto base_b = FluxCurve::coupler_model(omega_b, 0.0, targets.omega_c_max, targets.phi_offset);

    // Scale guess: modulation is kappa / omega^2 times an O(1) factor.
    const double guess_a = targets.modulation_a * omega_a * omega_a * 1e-3;
    const double kappa_a = solve_increasing(
        [&](double k) { return modulation_depth(base_a.with_kappa_pull(k)); }, targets.modulation_a,
        guess_a);
    const auto curve_a = base_a.with_kappa_pull(kappa_a);

    // The location of the maximum slope product does not depend on the scale
    // of kappa_B.
    const auto probe_b = base_b.with_kappa_pull(kappa_a);
    const double off = targets.phi_offset;
    auto neg_product = [&](double phi) {
        return -std::abs(curve_a.slope_at(phi) * probe_b.slope_at(phi));
    };
    const auto [bias, _] =
        boost::math::tools::brent_find_minima(neg_product, off + 1e-6, off + 0.5 - 1e-6, 52);
    CouplerState coupler(bias, targets.delta_phi_ref, off, targets.omega_c_max);

    const double guess_b = targets.coupling * omega_b * omega_b * 1e-3;
    const double kappa_b = solve_increasing(
        [&](double k) { return coupling_rate(curve_a, base_b.with_kappa_pull(k), coupler).g_p; },
        targets.coupling, guess_b);

    return FluxModel{curve_a, base_b.with_kappa_pull(kappa_b), coupler,
                     flux_calibration_for(targets.power_ref_dbm, targets.delta_phi_ref)};
}

} // namespace pfc
