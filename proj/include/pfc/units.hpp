// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <numbers>
#include <string>
#include <string_view>

namespace pfc {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Ordinary frequency (Hz) to angular frequency (rad/s).
constexpr double angular(double hz) noexcept { return two_pi * hz; }
/// Angular frequency (rad/s) to ordinary frequency (Hz).
constexpr double hertz(double rad_per_s) noexcept { return rad_per_s / two_pi; }

enum class Dimension { none, frequency, time, angle, power };

enum class Unit { none, GHz, MHz, kHz, Hz, s, us, ns, deg, rad, dBm };

Dimension dimension_of(Unit u) noexcept;
std::string_view unit_suffix(Unit u) noexcept;

/// A number as written in a text file together with its unit.
///
/// `text` keeps the literal mantissa so that emitting a parsed file reproduces
/// it byte for byte. `si()` converts to internal units: frequencies become
/// angular (rad/s), times seconds, angles radians, powers stay dBm.
struct Quantity {
    double value = 0.0;
    Unit unit = Unit::none;
    std::string text;

    double si() const noexcept;
    Dimension dimension() const noexcept { return dimension_of(unit); }
    std::string str() const;

    /// Parses e.g. "8.70GHz", "0.6us", "-52dBm", "900e3". Throws ValidationError.
    static Quantity parse(std::string_view token);
    /// Builds from a value in `unit` with shortest round-trip formatting.
    static Quantity of(double value, Unit unit);
};

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

} // namespace pfc
