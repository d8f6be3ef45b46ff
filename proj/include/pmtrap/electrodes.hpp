#pragma once

// Voltage assignments over the eleven electrodes (eight DC pads + three RF
// bands) and the surface potential they impose on the mirror, including the
// linear interpolation across inter-segment gaps.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pmtrap/geometry.hpp"

namespace pmtrap {

/// Per-electrode voltages, ordered 1a 1b 1c 1d, 2, 3, 4, 5a 5b 5c 5d.
struct ElectrodeVoltages {
    static constexpr int count = 11;
    std::array<double, count> v{};

    static int index_of(const PadId& pad) {
        const int q = static_cast<int>(pad.quadrant);
        if (pad.segment == 1) return q;
        if (pad.segment == 5) return 7 + q;
        throw std::invalid_argument("ElectrodeVoltages: pads exist on segments 1 and 5 only");
    }

    static int index_of_segment(int segment) {
        if (segment < 2 || segment > 4)
            throw std::invalid_argument("ElectrodeVoltages: segments 2-4 are single electrodes");
        return segment + 2;  // 4, 5, 6
    }

    double pad(const PadId& p) const { return v[static_cast<std::size_t>(index_of(p))]; }
    double& pad(const PadId& p) { return v[static_cast<std::size_t>(index_of(p))]; }
    double segment(int s) const { return v[static_cast<std::size_t>(index_of_segment(s))]; }
    double& segment(int s) { return v[static_cast<std::size_t>(index_of_segment(s))]; }

    /// Electrode potential at a surface site (segment or pad).
    double at(const SurfaceSite& site) const {
        if (site.gap) throw std::invalid_argument("ElectrodeVoltages::at: site is a gap");
        if (site.quadrant) return pad({site.segment, *site.quadrant});
        return segment(site.segment);
    }

    static ElectrodeVoltages zero() { return {}; }

    static ElectrodeVoltages uniform(double value) {
        ElectrodeVoltages e;
        e.v.fill(value);
        return e;
    }

    /// RF-only assignment: bands 2-4 driven, every pad grounded.
    static ElectrodeVoltages rf(double v2, double v3, double v4) {
        ElectrodeVoltages e;
        e.segment(2) = v2;
        e.segment(3) = v3;
        e.segment(4) = v4;
        return e;
    }

    ElectrodeVoltages operator+(const ElectrodeVoltages& o) const {
        ElectrodeVoltages e;
        for (int i = 0; i < count; ++i) e.v[static_cast<std::size_t>(i)] =
            v[static_cast<std::size_t>(i)] + o.v[static_cast<std::size_t>(i)];
        return e;
    }

    ElectrodeVoltages operator*(double s) const {
        ElectrodeVoltages e;
        for (int i = 0; i < count; ++i) e.v[static_cast<std::size_t>(i)] = s * v[static_cast<std::size_t>(i)];
        return e;
    }

    static const std::array<std::string, count>& names() {
        static const std::array<std::string, count> n{"1a", "1b", "1c", "1d", "2", "3",
                                                      "4",  "5a", "5b", "5c", "5d"};
        return n;
    }
};

/// Mean voltage over the four pads of segment 1 or 5.
inline double segment_mean_voltage(const ElectrodeVoltages& volts, int segment) {
    if (segment >= 2 && segment <= 4) return volts.segment(segment);
    double s = 0.0;
    for (int q = 0; q < 4; ++q) s += volts.pad({segment, static_cast<Quadrant>(q)});
    return 0.25 * s;
}

/// Unit-voltage surface profile of one segment band as a function of surface
/// height: 1 on the band, linear ramp across adjacent gaps, 0 elsewhere.
/// Heights above the top band are treated as part of segment 5.
inline double segment_surface_profile(const ElectrodeLayout& layout, int segment, double z_mm) {
    const auto& s = layout.segment(segment);
    if (z_mm >= s.z_lower_mm && z_mm <= s.z_upper_mm) return 1.0;
    if (segment == 5 && z_mm >= s.z_upper_mm) return 1.0;  // virtual wall continuation
    if (segment > 1) {
        const auto& below = layout.segment(segment - 1);
        if (z_mm < s.z_lower_mm && z_mm > below.z_upper_mm)
            return (z_mm - below.z_upper_mm) / (s.z_lower_mm - below.z_upper_mm);
    }
    if (segment < 5) {
        const auto& above = layout.segment(segment + 1);
        if (z_mm > s.z_upper_mm && z_mm < above.z_lower_mm)
            return (above.z_lower_mm - z_mm) / (above.z_lower_mm - s.z_upper_mm);
    }
    return 0.0;
}

/// Surface potential of a full assignment at height z and azimuth. Pads make
/// the value azimuth-dependent; gap values interpolate the local neighbours.
inline double surface_potential(const ElectrodeLayout& layout, const ElectrodeVoltages& volts,
                                double z_mm, double azimuth_rad) {
    auto electrode_voltage = [&](int segment) {
        if (segment == 1 || segment == 5)
            return volts.pad({segment, quadrant_of(azimuth_rad)});
        return volts.segment(segment);
    };
    const double z = std::min(z_mm, layout.spec.depth_mm);
    for (int s = 1; s <= 5; ++s) {
        const auto& seg = layout.segment(s);
        if (z >= seg.z_lower_mm && z <= seg.z_upper_mm) return electrode_voltage(s);
    }
    if (z >= layout.segment(5).z_upper_mm) return electrode_voltage(5);
    if (z <= layout.segment(1).z_lower_mm) return electrode_voltage(1);
    for (int s = 1; s < 5; ++s) {
        const double lo = layout.segment(s).z_upper_mm;
        const double hi = layout.segment(s + 1).z_lower_mm;
        if (z > lo && z < hi) {
            const double t = (z - lo) / (hi - lo);
            return (1.0 - t) * electrode_voltage(s) + t * electrode_voltage(s + 1);
        }
    }
    return 0.0;
}

}  // namespace pmtrap
