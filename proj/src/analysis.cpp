// SPDX-License-Identifier: Apache-2.0
#include "pfc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>
#include <fftw3.h>

namespace pfc {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// The FFTW planner is not reentrant; execution is.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};

struct PlanDestroy {
    void operator()(fftw_plan_s* p) const noexcept {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(p);
    }
};

// Magnitude spectrum of a real signal, bins 0..n/2.
std::vector<double> magnitude_spectrum(const std::vector<double>& x) {
    const int n = static_cast<int>(x.size());
    std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * x.size())));
    std::unique_ptr<fftw_complex, FftwFree> out(
        static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (x.size() / 2 + 1))));
    if (!in || !out)
        throw std::bad_alloc();
    std::unique_ptr<fftw_plan_s, PlanDestroy> plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan.reset(fftw_plan_dft_r2c_1d(n, in.get(), out.get(), FFTW_ESTIMATE));
    }
    std::copy(x.begin(), x.end(), in.get());
    fftw_execute(plan.get());
    std::vector<double> mag(x.size() / 2 + 1);
    for (std::size_t k = 0; k < mag.size(); ++k)
        mag[k] = std::hypot(out.get()[k][0], out.get()[k][1]);
    return mag;
}

double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * std::numbers::pi);
    return a;
}

void require_finite(std::span<const Point> pts) {
    for (const auto& p : pts)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw ValidationError("fit input must be finite");
}

} // namespace

double FitResult::param(std::string_view name) const {
    for (const auto& [k, v] : params)
        if (k == name)
            return v;
    throw ValidationError("fit result has no parameter '" + std::string(name) + "'");
}

std::string FitResult::to_text(std::string_view prefix) const {
    std::ostringstream os;
    const std::string p(prefix);
    for (const auto& [k, v] : params)
        os << p << '.' << k << " = " << format_double(v) << '\n';
    os << p << ".residual_rms = " << format_double(residual_rms) << '\n';
    os << p << ".degenerate = " << (degenerate ? "true" : "false") << '\n';
    for (std::size_t i = 0; i < covariance.size(); ++i)
        for (std::size_t j = 0; j < covariance[i].size(); ++j)
            os << p << ".cov." << params[i].first << '.' << params[j].first << " = "
               << format_double(covariance[i][j]) << '\n';
    return os.str();
}

double oscillation_frequency(std::span<const double> series, double dt) {
    const std::size_t n = series.size();
    if (n < 16)
        throw ValidationError("oscillation analysis needs at least 16 samples");
    if (!(dt > 0) || !std::isfinite(dt))
        throw ValidationError("sample spacing must be positive");
    double scale = 0.0;
    for (double v : series) {
        if (!std::isfinite(v))
            throw ValidationError("series must be finite");
        scale = std::max(scale, std::abs(v));
    }
    if (scale == 0.0)
        throw NoOscillationError("no oscillation: series is zero");

    // Work on the normalized series so the result does not depend on the
    // overall amplitude.
    std::vector<double> x(series.begin(), series.end());
    for (auto& v : x)
        v /= scale;

    // Remove mean and linear ramp (least squares on k = 0..n-1).
    const double nn = static_cast<double>(n);
    const double kmean = (nn - 1) / 2;
    double ymean = 0.0;
    for (double v : x)
        ymean += v;
    ymean /= nn;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double dk = static_cast<double>(k) - kmean;
        sxy += dk * (x[k] - ymean);
        sxx += dk * dk;
    }
    const double slope = sxy / sxx;
    double resid = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        x[k] -= ymean + slope * (static_cast<double>(k) - kmean);
        resid = std::max(resid, std::abs(x[k]));
    }
    if (resid <= 1e-12)
        throw NoOscillationError("no oscillation: series is constant after detrending");

    for (std::size_t k = 0; k < n; ++k)
        x[k] *= 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / (nn - 1)));

    const std::size_t padded = 8 * n;
    x.resize(padded, 0.0);
    const auto mag = magnitude_spectrum(x);

    // Skip the falling edge of the zero-frequency lobe; a decaying envelope
    // otherwise outweighs the oscillation.
    std::size_t first = 1;
    while (first + 1 < mag.size() && mag[first] <= mag[first - 1])
        ++first;
    if (first + 1 >= mag.size())
        throw NoOscillationError("no oscillation: spectrum has no peak away from zero frequency");
    std::size_t peak = first;
    for (std::size_t k = first + 1; k + 1 < mag.size(); ++k)
        if (mag[k] > mag[peak])
            peak = k;
    double offset = 0.0;
    if (peak + 1 < mag.size()) {
        const double a = mag[peak - 1];
        const double b = mag[peak];
        const double c = mag[peak + 1];
        const double den = a - 2 * b + c;
        if (den != 0.0)
            offset = 0.5 * (a - c) / den;
    }
    const double f = (static_cast<double>(peak) + offset) / (static_cast<double>(padded) * dt);
    return angular(f);
}

FitResult fit_exponential_decay(std::span<const Point> points) {
    const std::size_t n = points.size();
    if (n < 4)
        throw ValidationError("decay fit needs at least 4 points");
    require_finite(points);
    for (std::size_t i = 0; i < n; ++i) {
        if (points[i].y < 0)
            throw ValidationError("decay fit needs non-negative energies");
        if (i > 0 && !(points[i].x > points[i - 1].x))
            throw ValidationError("decay fit needs strictly increasing times");
    }

    const double t0 = points.front().x;
    const double span = points.back().x - t0;
    double ymax = 0.0;
    double ymin = inf;
    double ysum = 0.0;
    for (const auto& p : points) {
        ymax = std::max(ymax, p.y);
        ymin = std::min(ymin, p.y);
        ysum += p.y;
    }

    FitResult r;
    if (ymax == 0.0 || (ymax - ymin) <= 1e-9 * ymax) {
        r.params = {{"amplitude", 0.0}, {"tau", inf}, {"offset", ysum / static_cast<double>(n)}};
        r.degenerate = true;
        double ss = 0.0;
        for (const auto& p : points)
            ss += (p.y - ysum / static_cast<double>(n)) * (p.y - ysum / static_cast<double>(n));
        r.residual_rms = std::sqrt(ss / static_cast<double>(n));
        return r;
    }

    // Scaled problem: s = (t - t0) / span in [0, 1], v = y / ymax.
    Eigen::VectorXd s(static_cast<Eigen::Index>(n));
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        s(static_cast<Eigen::Index>(i)) = (points[i].x - t0) / span;
        v(static_cast<Eigen::Index>(i)) = points[i].y / ymax;
    }

    // Log-linear start on v - c0.
    const double vmin = ymin / ymax;
    const double c0 = vmin > 0 ? 0.0 : vmin - 1e-3 * (1.0 - vmin);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        const double ly = std::log(std::max(v(i) - c0, 1e-300));
        sx += s(i);
        sy += ly;
        sxx += s(i) * s(i);
        sxy += s(i) * ly;
    }
    const double nn = static_cast<double>(n);
    const double lslope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    const double lint = (sy - lslope * sx) / nn;
    Eigen::Vector3d p(std::exp(lint), std::max(-lslope, 1e-3), c0); // amplitude, rate, offset

    auto residuals = [&](const Eigen::Vector3d& q) {
        Eigen::VectorXd res(s.size());
        for (Eigen::Index i = 0; i < s.size(); ++i)
            res(i) = q(0) * std::exp(-q(1) * s(i)) + q(2) - v(i);
        return res;
    };
    auto jacobian = [&](const Eigen::Vector3d& q) {
        Eigen::MatrixXd j(s.size(), 3);
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            const double e = std::exp(-q(1) * s(i));
            j(i, 0) = e;
            j(i, 1) = -q(0) * s(i) * e;
            j(i, 2) = 1.0;
        }
        return j;
    };

    auto unscaled = [&](const Eigen::Vector3d& q) {
        FitResult out;
        const double amp = q(0) * ymax * std::exp(q(1) * t0 / span);
        const double tau = span / q(1);
        out.params = {{"amplitude", amp}, {"tau", tau}, {"offset", q(2) * ymax}};
        out.residual_rms = ymax * std::sqrt(residuals(q).squaredNorm() / nn);
        return out;
    };

    Eigen::VectorXd res = residuals(p);
    double sse = res.squaredNorm();
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
        const Eigen::MatrixXd j = jacobian(p);
        const Eigen::Vector3d step = j.colPivHouseholderQr().solve(-res);
        if (!step.allFinite())
            break;
        double lambda = 1.0;
        Eigen::Vector3d trial = p + step;
        Eigen::VectorXd tres = residuals(trial);
        double tsse = tres.squaredNorm();
        int halvings = 0;
        while (!(tsse <= sse) && halvings < 40) {
            lambda *= 0.5;
            trial = p + lambda * step;
            tres = residuals(trial);
            tsse = tres.squaredNorm();
            ++halvings;
        }
        const double rel = (lambda * step).norm() / std::max(p.norm(), 1e-300);
        if (tsse <= sse) {
            p = trial;
            res = tres;
            sse = tsse;
        }
        if (rel < 1e-10 || sse == 0.0) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw FitConvergenceError("decay fit did not converge in 100 iterations", unscaled(p));
    if (!(p(1) > 0)) {
        if (std::abs(p(1)) < 1e-12) {
            auto flat = unscaled(p);
            flat.params[1].second = inf;
            flat.degenerate = true;
            return flat;
        }
        throw FitConvergenceError("decay fit produced a negative decay time", unscaled(p));
    }

    r = unscaled(p);
    // Covariance in physical units.
    if (n > 3) {
        const double amp = r.params[0].second;
        const double tau = r.params[1].second;
        Eigen::MatrixXd j(static_cast<Eigen::Index>(n), 3);
        for (std::size_t i = 0; i < n; ++i) {
            const double e = std::exp(-points[i].x / tau);
            const auto ii = static_cast<Eigen::Index>(i);
            j(ii, 0) = e;
            j(ii, 1) = amp * points[i].x / (tau * tau) * e;
            j(ii, 2) = 1.0;
        }
        const double s2 = r.residual_rms * r.residual_rms * nn / (nn - 3);
        const Eigen::Matrix3d jtj = j.transpose() * j;
        Eigen::FullPivLU<Eigen::Matrix3d> lu(jtj);
        if (lu.isInvertible()) {
            const Eigen::Matrix3d cov = s2 * lu.inverse();
            r.covariance.assign(3, std::vector<double>(3));
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    r.covariance[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = cov(a, b);
        }
    }
    return r;
}

double efficiency(double retrieved, double reference) {
    if (!(reference > 0) || !std::isfinite(reference))
        throw ValidationError("reference energy must be positive");
    if (!std::isfinite(retrieved))
        throw ValidationError("retrieved energy must be finite");
    return retrieved / reference;
}

DwellTimes occupancy_dwell(const TraceRecord& trace, double t_start, double t_end) {
    if (!(t_end >= t_start))
        throw ValidationError("dwell window must be well ordered");
    const double slack = 1e-9 * std::max(t_end - t_start, 1e-15);
    DwellTimes d;
    const TraceSample* prev = nullptr;
    double prev_pa = 0.0;
    for (const auto& s : trace.samples) {
        if (s.t < t_start - slack || s.t > t_end + slack)
            continue;
        const double e = std::norm(s.a) + std::norm(s.b);
        if (!(e > 0))
            throw ValidationError("degenerate occupancy: total energy is zero");
        const double pa = std::norm(s.a) / e;
        if (prev) {
            const double h = s.t - prev->t;
            d.a += 0.5 * h * (prev_pa + pa);
            d.b += 0.5 * h * ((1 - prev_pa) + (1 - pa));
        }
        prev = &s;
        prev_pa = pa;
    }
    return d;
}

double loss_corrected_efficiency(double eta, const ModePair& modes, const DwellTimes& dwell) {
    if (!(eta > 0 && eta <= 1))
        throw ValidationError("efficiency must lie in (0, 1]");
    return eta / std::exp(-modes.a.gamma_total() * dwell.a - modes.b.gamma_total() * dwell.b);
}

double loss_corrected_efficiency(double eta, const TraceRecord& trace, const ModePair& modes) {
    if (trace.samples.empty())
        throw ValidationError("empty trace");
    double storage_start = trace.samples.front().t;
    const TraceSpan* last_swap = nullptr;
    for (const auto& s : trace.spans) {
        if (s.label.ends_with(":load"))
            storage_start = s.t_end;
        if (s.label.ends_with(":swap"))
            last_swap = &s;
    }
    DwellTimes dwell;
    if (last_swap) {
        dwell.a = occupancy_dwell(trace, storage_start, last_swap->t_start).a;
        dwell.b = occupancy_dwell(trace, storage_start, last_swap->t_end).b;
    } else {
        dwell = occupancy_dwell(trace, storage_start, trace.samples.back().t);
    }
    return loss_corrected_efficiency(eta, modes, dwell);
}

FitResult fit_line(std::span<const Point> points) {
    const std::size_t n = points.size();
    if (n < 2)
        throw ValidationError("line fit needs at least 2 points");
    require_finite(points);
    const double nn = static_cast<double>(n);
    double mx = 0, my = 0;
    for (const auto& p : points) {
        mx += p.x;
        my += p.y;
    }
    mx /= nn;
    my /= nn;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& p : points) {
        sxx += (p.x - mx) * (p.x - mx);
        sxy += (p.x - mx) * (p.y - my);
        syy += (p.y - my) * (p.y - my);
    }
    if (sxx == 0.0)
        throw ValidationError("line fit needs distinct abscissae");
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double ss = 0.0;
    for (const auto& p : points) {
        const double e = p.y - (slope * p.x + intercept);
        ss += e * e;
    }
    FitResult r;
    r.params = {{"slope", slope}, {"intercept", intercept}, {"r_squared", syy > 0 ? 1.0 - ss / syy : 1.0}};
    r.residual_rms = std::sqrt(ss / nn);
    if (n > 2) {
        const double s2 = ss / (nn - 2);
        const double vs = s2 / sxx;
        const double vi = s2 * (1.0 / nn + mx * mx / sxx);
        const double cv = -mx * s2 / sxx;
        r.covariance = {{vs, cv, 0.0}, {cv, vi, 0.0}, {0.0, 0.0, 0.0}};
    }
    return r;
}

FitResult fit_phase_slope(std::span<const Point> points) {
    if (points.size() < 3)
        throw ValidationError("phase slope fit needs at least 3 points");
    require_finite(points);
    for (std::size_t i = 1; i < points.size(); ++i)
        if (!(points[i].x > points[i - 1].x))
            throw ValidationError("pump phases must be strictly increasing");
    if (points.back().x - points.front().x < std::numbers::pi - 1e-12)
        throw ValidationError("pump phases must span at least pi");

    std::vector<Point> unwrapped(points.begin(), points.end());
    for (std::size_t i = 1; i < unwrapped.size(); ++i) {
        const double raw = points[i].y - points[i - 1].y;
        const double step = wrap_angle(raw);
        if (std::abs(step) >= std::numbers::pi - 1e-12)
            throw ValidationError("phase unwrap is ambiguous between points " + std::to_string(i - 1) +
                                  " and " + std::to_string(i));
        unwrapped[i].y = unwrapped[i - 1].y + step;
    }
    auto line = fit_line(unwrapped);
    FitResult r;
    r.params = {{"slope", line.param("slope")}, {"intercept", line.param("intercept")}};
    r.residual_rms = line.residual_rms;
    if (!line.covariance.empty())
        r.covariance = {{line.covariance[0][0], line.covariance[0][1]},
                        {line.covariance[1][0], line.covariance[1][1]}};
    return r;
}

double chevron_relative_rms(std::span<const Point> points, double g_p) {
    if (points.empty())
        throw ValidationError("chevron needs points");
    double ss = 0.0;
    for (const auto& p : points) {
        const double model = rabi_frequency(p.x, g_p);
        const double e = (p.y - model) / model;
        ss += e * e;
    }
    return std::sqrt(ss / static_cast<double>(points.size()));
}

FitResult fit_chevron(std::span<const Point> points) {
    if (points.size() < 2)
        throw ValidationError("chevron fit needs at least 2 points");
    require_finite(points);
    double hi = 0.0;
    for (const auto& p : points) {
        if (!(p.y > 0))
            throw ValidationError("chevron fit needs positive frequencies");
        hi = std::max(hi, p.y);
    }
    auto cost = [&](double g) { return chevron_relative_rms(points, g); };
    const auto [g, rms] = boost::math::tools::brent_find_minima(cost, 0.0, hi, 52);
    FitResult r;
    r.params = {{"g_p", g}};
    r.residual_rms = rms;
    return r;
}

std::vector<Point> local_minima(std::span<const Point> curve) {
    std::vector<Point> out;
    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
        const double a = curve[i - 1].y;
        const double b = curve[i].y;
        const double c = curve[i + 1].y;
        if (!(b < a && b <= c))
            continue;
        const double den = a - 2 * b + c;
        double off = den != 0.0 ? 0.5 * (a - c) / den : 0.0;
        const double h = 0.5 * (curve[i + 1].x - curve[i - 1].x);
        out.push_back({curve[i].x + off * h, b - 0.25 * (a - c) * off});
    }
    std::sort(out.begin(), out.end(), [](const Point& l, const Point& r) { return l.y < r.y; });
    return out;
}

double polygon_area(std::span<const cplx> v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& p = v[i];
        const auto& q = v[(i + 1) % v.size()];
        acc += p.real() * q.imag() - q.real() * p.imag();
    }
    return 0.5 * acc;
}

} // namespace pfc
