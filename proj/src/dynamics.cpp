// SPDX-License-Identifier: Apache-2.0
#include "pfc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

namespace pfc {

namespace {

constexpr cplx I{0.0, 1.0};
constexpr double samples_per_period = 50.0;

Amplitudes axpy(const Amplitudes& x, double h, const Amplitudes& k) {
    return {x.a + h * k.a, x.b + h * k.b, x.t};
}

bool finite(const Amplitudes& s) {
    return std::isfinite(s.a.real()) && std::isfinite(s.a.imag()) && std::isfinite(s.b.real()) &&
           std::isfinite(s.b.imag());
}

TraceSample sample_of(const Amplitudes& s, const ModePair& modes, const std::optional<DriveTone>& drive,
                      Frame frame) {
    const cplx in = drive ? drive->incident(s.t, frame, modes.a.omega()) : cplx{};
    return {s.t, s.a, s.b, in - std::sqrt(modes.a.gamma_ext()) * s.a};
}

void csv_number(std::ostream& os, double v) { os << format_double(v); }

} // namespace

std::string_view frame_name(Frame f) noexcept { return f == Frame::lab ? "lab" : "rotating"; }

void DriveTone::validate() const {
    if (!(std::isfinite(amp_in) && amp_in >= 0))
        throw ValidationError("drive amplitude must be non-negative");
    if (!(std::isfinite(omega_d) && std::isfinite(phase)))
        throw ValidationError("drive frequency and phase must be finite");
    if (!(t_off >= t_on))
        throw ValidationError("drive support must be well ordered");
}

cplx DriveTone::incident(double t, Frame frame, double omega_a) const noexcept {
    if (t < t_on || t > t_off)
        return {};
    const double rate = frame == Frame::lab ? omega_d : omega_d - omega_a;
    return std::polar(amp_in, phase - rate * t);
}

void SimConfig::validate() const {
    if (!(std::isfinite(dt) && dt > 0))
        throw ValidationError("integrator step must be positive");
    if (!(std::isfinite(t_end) && t_end > 0))
        throw ValidationError("end time must be positive");
    if (record_stride < 1)
        throw ValidationError("record stride must be at least 1");
    if (!(tolerance > 0))
        throw ValidationError("tolerance must be positive");
}

Amplitudes derivative(const Amplitudes& s, double t, const ModePair& modes, cplx coupling,
                      double omega_p, const DriveTone* drive, Frame frame) {
    const auto& ma = modes.a;
    const auto& mb = modes.b;
    Amplitudes d;
    d.t = t;
    if (frame == Frame::lab) {
        const cplx carrier = std::polar(1.0, omega_p * t);
        d.a = -I * cplx(ma.omega(), -ma.gamma_total() / 2) * s.a - I * coupling * carrier * s.b;
        d.b = -I * cplx(mb.omega(), -mb.gamma_total() / 2) * s.b -
              I * std::conj(coupling * carrier) * s.a;
    } else {
        const double delta = omega_p - std::abs(ma.omega() - mb.omega());
        const cplx c = coupling * std::polar(1.0, delta * t);
        d.a = -0.5 * ma.gamma_total() * s.a - I * c * s.b;
        d.b = -0.5 * mb.gamma_total() * s.b - I * std::conj(c) * s.a;
    }
    if (drive)
        d.a += std::sqrt(ma.gamma_ext()) * drive->incident(t, frame, ma.omega());
    return d;
}

Amplitudes derivative(const Amplitudes& state, double t, const ModePair& modes,
                      const PumpDrive& pump, const DriveTone* drive, Frame frame) {
    return derivative(state, t, modes, pump.coupling(t), pump.omega_p, drive, frame);
}

double max_step(const ModePair& modes, const PumpDrive& pump, const DriveTone* drive, Frame frame) {
    double fastest = 0.0;
    if (frame == Frame::lab) {
        fastest = std::max({modes.a.omega(), modes.b.omega(), std::abs(pump.omega_p)});
        if (drive)
            fastest = std::max(fastest, std::abs(drive->omega_d));
    } else {
        fastest = std::max({std::abs(detuning(pump, modes.a, modes.b)), pump.envelope.peak(),
                            modes.a.gamma_total(), modes.b.gamma_total()});
        if (drive)
            fastest = std::max(fastest, std::abs(drive->omega_d - modes.a.omega()));
    }
    if (fastest == 0.0)
        return std::numeric_limits<double>::infinity();
    return two_pi / (samples_per_period * fastest);
}

TraceRecord integrate(const Amplitudes& initial, const ModePair& modes, const PumpDrive& pump,
                      const std::optional<DriveTone>& drive, const SimConfig& config) {
    config.validate();
    if (drive)
        drive->validate();
    if (!finite(initial) || !std::isfinite(initial.t))
        throw ValidationError("initial state must be finite");
    if (!(config.t_end > initial.t))
        throw ValidationError("end time must come after the initial time");
    if (config.frame == Frame::lab && pump.envelope.peak() > 0 &&
        !(modes.b.omega() > modes.a.omega()))
        throw ValidationError("lab-frame pumping requires the storage mode above the readout mode");

    const DriveTone* dptr = drive ? &*drive : nullptr;
    const double limit = max_step(modes, pump, dptr, config.frame);
    if (config.dt > limit) {
        std::ostringstream os;
        os << "step " << config.dt << " s too coarse for the " << frame_name(config.frame)
           << " frame (limit " << limit << " s)";
        throw ResolutionError(os.str());
    }

    const double t0 = initial.t;
    const double span = config.t_end - t0;
    const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(span / config.dt * (1 - 1e-12))));
    const double h = span / static_cast<double>(steps);

    TraceRecord rec;
    rec.frame = config.frame;
    rec.omega_a = modes.a.omega();
    rec.omega_b = modes.b.omega();
    rec.samples.reserve(steps / config.record_stride + 2);

    auto f = [&](const Amplitudes& s, double t) {
        return derivative(s, t, modes, pump, dptr, config.frame);
    };

    Amplitudes x = initial;
    rec.samples.push_back(sample_of(x, modes, drive, config.frame));
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = t0 + static_cast<double>(k) * h;
        const double t_next = k + 1 == steps ? config.t_end : t0 + static_cast<double>(k + 1) * h;
        const double tm = t + 0.5 * h;
        const auto k1 = f(x, t);
        const auto k2 = f(axpy(x, 0.5 * h, k1), tm);
        const auto k3 = f(axpy(x, 0.5 * h, k2), tm);
        const auto k4 = f(axpy(x, h, k3), t_next);
        x.a += h / 6.0 * (k1.a + 2.0 * k2.a + 2.0 * k3.a + k4.a);
        x.b += h / 6.0 * (k1.b + 2.0 * k2.b + 2.0 * k3.b + k4.b);
        x.t = t_next;
        if (!finite(x)) {
            std::ostringstream os;
            os << "non-finite state at t = " << x.t << " s after " << k + 1 << " steps";
            throw ConvergenceError(os.str());
        }
        if ((k + 1) % config.record_stride == 0 || k + 1 == steps)
            rec.samples.push_back(sample_of(x, modes, drive, config.frame));
    }

    rec.metadata["frame"] = frame_name(config.frame);
    rec.metadata["dt_s"] = format_double(config.dt);
    rec.metadata["step_s"] = format_double(h);
    rec.metadata["steps"] = std::to_string(steps);
    rec.metadata["record_stride"] = std::to_string(config.record_stride);
    rec.metadata["t_start_s"] = format_double(t0);
    rec.metadata["t_end_s"] = format_double(config.t_end);
    rec.metadata["omega_a_rad_s"] = format_double(modes.a.omega());
    rec.metadata["omega_b_rad_s"] = format_double(modes.b.omega());
    rec.metadata["gamma_int_a_rad_s"] = format_double(modes.a.gamma_int());
    rec.metadata["gamma_ext_a_rad_s"] = format_double(modes.a.gamma_ext());
    rec.metadata["gamma_int_b_rad_s"] = format_double(modes.b.gamma_int());
    rec.metadata["gamma_ext_b_rad_s"] = format_double(modes.b.gamma_ext());
    rec.metadata["omega_p_rad_s"] = format_double(pump.omega_p);
    rec.metadata["phi_p_rad"] = format_double(pump.phi_p);
    rec.metadata["g_p_peak_rad_s"] = format_double(pump.envelope.peak());
    return rec;
}

double half_step_deviation(const Amplitudes& initial, const ModePair& modes, const PumpDrive& pump,
                           const std::optional<DriveTone>& drive, const SimConfig& config) {
    SimConfig coarse = config;
    coarse.record_stride = std::numeric_limits<std::size_t>::max();
    SimConfig fine = coarse;
    fine.dt = config.dt / 2;
    const auto x1 = integrate(initial, modes, pump, drive, coarse).final_state();
    const auto x2 = integrate(initial, modes, pump, drive, fine).final_state();
    const double diff = std::sqrt(std::norm(x1.a - x2.a) + std::norm(x1.b - x2.b));
    const double scale = std::sqrt(x2.energy());
    return scale > 0 ? diff / scale : diff;
}

double rabi_frequency(double delta, double g_p) noexcept {
    return std::sqrt(delta * delta + 4.0 * g_p * g_p);
}

std::vector<cplx> reflection_spectrum(const ModeParams& mode_a, const ModeParams& mode_b,
                                      const PumpDrive& pump, const std::vector<double>& probe_omegas) {
    if (!pump.envelope.is_constant() && pump.envelope.peak() > 0)
        throw ValidationError("reflection spectrum needs a CW pump");
    const double g = pump.envelope.peak();
    const double delta = detuning(pump, mode_a, mode_b);
    const double ka = mode_a.gamma_total() / 2;
    const double kb = mode_b.gamma_total() / 2;
    const double root_ext = std::sqrt(mode_a.gamma_ext());
    const cplx c = std::polar(g, pump.phi_p);

    std::vector<cplx> out;
    out.reserve(probe_omegas.size());
    for (double w : probe_omegas) {
        const double da = w - mode_a.omega();
        const double db = da + delta;
        Eigen::Matrix2cd m;
        m << cplx(ka, -da), I * c, I * std::conj(c), cplx(kb, -db);
        // Unit incident amplitude.
        Eigen::Vector2cd rhs(root_ext, 0.0);
        const cplx det = m.determinant();
        if (std::abs(det) == 0.0)
            throw ValidationError("steady state is singular at probe frequency " +
                                  format_double(w) + " rad/s");
        const Eigen::Vector2cd x = m.partialPivLu().solve(rhs);
        out.push_back(1.0 - root_ext * x(0));
    }
    return out;
}

std::string TraceRecord::to_csv() const {
    std::ostringstream os;
    os << "t_s,re_a,im_a,re_b,im_b,re_aout,im_aout\n";
    for (const auto& s : samples) {
        csv_number(os, s.t);
        for (double v : {s.a.real(), s.a.imag(), s.b.real(), s.b.imag(), s.a_out.real(), s.a_out.imag()}) {
            os << ',';
            csv_number(os, v);
        }
        os << '\n';
    }
    return os.str();
}

std::string TraceRecord::metadata_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : metadata)
        os << k << " = " << v << '\n';
    for (std::size_t i = 0; i < spans.size(); ++i) {
        os << "span." << i << ".label = " << spans[i].label << '\n';
        os << "span." << i << ".t_start_s = " << format_double(spans[i].t_start) << '\n';
        os << "span." << i << ".t_end_s = " << format_double(spans[i].t_end) << '\n';
    }
    return os.str();
}

Amplitudes TraceRecord::final_state() const {
    if (samples.empty())
        throw ValidationError("empty trace");
    const auto& s = samples.back();
    return {s.a, s.b, s.t};
}

} // namespace pfc
