// SPDX-License-Identifier: Apache-2.0
#include "pfc/units.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <utility>

#include "pfc/errors.hpp"

namespace pfc {

namespace {

struct UnitInfo {
    Unit unit;
    std::string_view suffix;
    Dimension dim;
    double scale; // to SI before the angular conversion
};

constexpr std::array<UnitInfo, 10> unit_table{{
    {Unit::GHz, "GHz", Dimension::frequency, 1e9},
    {Unit::MHz, "MHz", Dimension::frequency, 1e6},
    {Unit::kHz, "kHz", Dimension::frequency, 1e3},
    {Unit::Hz, "Hz", Dimension::frequency, 1.0},
    {Unit::us, "us", Dimension::time, 1e-6},
    {Unit::ns, "ns", Dimension::time, 1e-9},
    {Unit::s, "s", Dimension::time, 1.0},
    {Unit::deg, "deg", Dimension::angle, std::numbers::pi / 180.0},
    {Unit::rad, "rad", Dimension::angle, 1.0},
    {Unit::dBm, "dBm", Dimension::power, 1.0},
}};

const UnitInfo* info(Unit u) {
    for (const auto& e : unit_table)
        if (e.unit == u)
            return &e;
    return nullptr;
}

} // namespace

Dimension dimension_of(Unit u) noexcept {
    const auto* e = info(u);
    return e ? e->dim : Dimension::none;
}

std::string_view unit_suffix(Unit u) noexcept {
    const auto* e = info(u);
    return e ? e->suffix : std::string_view{};
}

double Quantity::si() const noexcept {
    const auto* e = info(unit);
    if (!e)
        return value;
    const double v = value * e->scale;
    return e->dim == Dimension::frequency ? angular(v) : v;
}

std::string Quantity::str() const {
    return text + std::string(unit_suffix(unit));
}

Quantity Quantity::parse(std::string_view token) {
    if (token.empty())
        throw ValidationError("empty numeric value");
    double v = 0.0;
    const auto* first = token.data();
    const auto* last = token.data() + token.size();
    // from_chars rejects a leading '+'
    if (*first == '+')
        ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr == first)
        throw ValidationError("malformed number '" + std::string(token) + "'");
    if (!std::isfinite(v))
        throw ValidationError("non-finite number '" + std::string(token) + "'");
    const std::string_view rest(ptr, static_cast<std::size_t>(last - ptr));
    Quantity q;
    q.value = v;
    q.text = std::string(token.substr(0, token.size() - rest.size()));
    if (rest.empty())
        return q;
    for (const auto& e : unit_table) {
        if (e.suffix == rest) {
            q.unit = e.unit;
            return q;
        }
    }
    throw ValidationError("unknown unit '" + std::string(rest) + "' in '" + std::string(token) + "'");
}

Quantity Quantity::of(double value, Unit unit) {
    return Quantity{value, unit, format_double(value)};
}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

} // namespace pfc
