#pragma once

// Trap geometry: the paraboloid mirror surface z(r) = r^2/4f and its division
// into five electrode bands (1 and 5 split into four quadrant pads each).

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pmtrap/common.hpp"

namespace pmtrap {

/// Paraboloid of revolution, apex at the origin, axis along +z.
struct ParaboloidSpec {
    double focal_length_mm = 2.1;
    double aperture_diameter_mm = 31.5;
    double depth_mm = 29.5;

    double aperture_radius_mm() const { return 0.5 * aperture_diameter_mm; }
    double focus_z_mm() const { return focal_length_mm; }
};

/// Surface height z(r) = r^2/(4f). Throws for r < 0 or beyond the aperture.
inline double surface_point(const ParaboloidSpec& spec, double r_mm) {
    if (r_mm < 0.0) throw std::domain_error("surface_point: negative radius");
    if (r_mm > spec.aperture_radius_mm() * (1.0 + 1e-12))
        throw std::domain_error("surface_point: radius beyond aperture rim");
    return r_mm * r_mm / (4.0 * spec.focal_length_mm);
}

enum class SegmentKind { RF, DC };

struct SegmentDef {
    int id = 0;                // 1..5, from apex upward
    double z_lower_mm = 0.0;
    double z_upper_mm = 0.0;
    SegmentKind kind = SegmentKind::DC;
};

enum class Quadrant : int { A = 0, B = 1, C = 2, D = 3 };

inline char quadrant_letter(Quadrant q) { return static_cast<char>('a' + static_cast<int>(q)); }

/// One of the eight DC pads: segment 1 or 5 plus a quadrant letter.
struct PadId {
    int segment = 1;       // 1 or 5
    Quadrant quadrant = Quadrant::A;

    std::string name() const { return std::to_string(segment) + quadrant_letter(quadrant); }
};

/// Which electrode edge: segment id plus lower/upper boundary.
struct EdgeId {
    int segment = 1;
    bool upper = false;

    std::string name() const { return std::to_string(segment) + (upper ? "up" : "down"); }
};

/// The eight edges that bound RF-relevant surface regions, apex to rim order.
inline std::array<EdgeId, 8> movable_edges() {
    return {{{1, true}, {2, false}, {2, true}, {3, false},
             {3, true}, {4, false}, {4, true}, {5, false}}};
}

struct LayoutViolation {
    enum class Kind {
        BadInterval,       // z_lower >= z_upper or out of [0, depth]
        Overlap,           // adjacent intervals intersect or gap non-positive
        KindMismatch,      // RF/DC role does not match segment id
        FocusOffCenter,    // focus not at the midpoint of the seg3-seg4 gap
        SpecInconsistent,  // depth vs aperture/focal-length mismatch
    };
    Kind kind;
    std::string message;

    /// Overlap/ordering problems make field solves ill-posed; the advisory
    /// kinds (focus centering, quoted-dimension consistency) do not.
    bool structural() const {
        return kind == Kind::BadInterval || kind == Kind::Overlap || kind == Kind::KindMismatch;
    }
};

struct ElectrodeLayout {
    ParaboloidSpec spec;
    std::array<SegmentDef, 5> segments;

    /// Reference layout: edge coordinates of the as-designed trap.
    static ElectrodeLayout reference() {
        ElectrodeLayout l;
        l.spec = ParaboloidSpec{};
        l.segments = {{
            {1, 0.000, 0.256, SegmentKind::DC},
            {2, 0.296, 1.096, SegmentKind::RF},
            {3, 1.136, 1.900, SegmentKind::RF},
            {4, 2.300, 3.000, SegmentKind::RF},
            {5, 3.040, l.spec.depth_mm, SegmentKind::DC},
        }};
        return l;
    }

    const SegmentDef& segment(int id) const { return segments.at(static_cast<std::size_t>(id - 1)); }
    SegmentDef& segment(int id) { return segments.at(static_cast<std::size_t>(id - 1)); }

    double edge_position(EdgeId e) const {
        const auto& s = segment(e.segment);
        return e.upper ? s.z_upper_mm : s.z_lower_mm;
    }

    /// Returns a copy with one edge moved by delta_mm along +z.
    ElectrodeLayout with_edge_shift(EdgeId e, double delta_mm) const {
        ElectrodeLayout l = *this;
        auto& s = l.segment(e.segment);
        (e.upper ? s.z_upper_mm : s.z_lower_mm) += delta_mm;
        return l;
    }

    std::uint64_t content_hash() const {
        std::vector<double> v{spec.focal_length_mm, spec.aperture_diameter_mm, spec.depth_mm};
        for (const auto& s : segments) {
            v.push_back(static_cast<double>(s.id));
            v.push_back(s.z_lower_mm);
            v.push_back(s.z_upper_mm);
            v.push_back(s.kind == SegmentKind::RF ? 1.0 : 0.0);
        }
        return hash_doubles(v.data(), v.size());
    }
};

/// All layout invariant checks; violations are returned as data, not thrown.
inline std::vector<LayoutViolation> validate_layout(const ElectrodeLayout& layout) {
    using K = LayoutViolation::Kind;
    std::vector<LayoutViolation> out;
    const auto& spec = layout.spec;

    if (spec.focal_length_mm <= 0.0)
        out.push_back({K::SpecInconsistent, "focal length must be positive"});
    else {
        const double r = spec.aperture_radius_mm();
        const double implied_depth = r * r / (4.0 * spec.focal_length_mm);
        if (std::abs(implied_depth - spec.depth_mm) > 0.01 * spec.depth_mm)
            out.push_back({K::SpecInconsistent,
                           "depth " + std::to_string(spec.depth_mm) + " mm vs (d/2)^2/4f = " +
                               std::to_string(implied_depth) + " mm differs by more than 1%"});
    }

    for (const auto& s : layout.segments) {
        if (s.z_lower_mm >= s.z_upper_mm)
            out.push_back({K::BadInterval, "segment " + std::to_string(s.id) + ": empty z interval"});
        if (s.z_lower_mm < -1e-12 || s.z_upper_mm > spec.depth_mm + 1e-9)
            out.push_back({K::BadInterval,
                           "segment " + std::to_string(s.id) + ": interval outside [0, depth]"});
        const bool want_rf = (s.id >= 2 && s.id <= 4);
        if ((s.kind == SegmentKind::RF) != want_rf)
            out.push_back({K::KindMismatch, "segment " + std::to_string(s.id) + ": wrong RF/DC role"});
    }

    for (int i = 0; i + 1 < 5; ++i) {
        const auto& a = layout.segments[static_cast<std::size_t>(i)];
        const auto& b = layout.segments[static_cast<std::size_t>(i + 1)];
        if (b.z_lower_mm <= a.z_upper_mm)
            out.push_back({K::Overlap, "edges " + std::to_string(a.id) + "up=" +
                                           std::to_string(a.z_upper_mm) + " and " + std::to_string(b.id) +
                                           "down=" + std::to_string(b.z_lower_mm) +
                                           ": segments touch or overlap"});
    }

    const double mid = 0.5 * (layout.segment(3).z_upper_mm + layout.segment(4).z_lower_mm);
    if (std::abs(mid - spec.focus_z_mm()) > 1e-6)
        out.push_back({K::FocusOffCenter, "edges 3up/4down: gap midpoint " + std::to_string(mid) +
                                              " mm is not the focus " +
                                              std::to_string(spec.focus_z_mm()) + " mm"});
    return out;
}

inline bool layout_structurally_valid(const ElectrodeLayout& layout) {
    for (const auto& v : validate_layout(layout))
        if (v.structural()) return false;
    return true;
}

/// Result of locating a surface point on the electrode pattern.
struct SurfaceSite {
    bool gap = true;
    int segment = 0;                        // valid when !gap
    std::optional<Quadrant> quadrant;       // set for segments 1 and 5

    std::string name() const {
        if (gap) return "gap";
        if (quadrant) return std::to_string(segment) + quadrant_letter(*quadrant);
        return std::to_string(segment);
    }
};

/// Quadrant containing the azimuth; boundary azimuths go to the lower letter.
inline Quadrant quadrant_of(double azimuth_rad) {
    double a = std::fmod(azimuth_rad, 2.0 * constants::pi);
    if (a < 0.0) a += 2.0 * constants::pi;
    const double q = constants::pi / 2.0;
    if (a <= q) return Quadrant::A;
    if (a <= 2.0 * q) return Quadrant::B;
    if (a <= 3.0 * q) return Quadrant::C;
    return Quadrant::D;
}

/// Maps a surface height to its electrode. Intervals are closed at z_lower and
/// open at z_upper, except segment 5 which also owns its upper edge (the rim).
inline SurfaceSite electrode_at(const ElectrodeLayout& layout, double z_mm, double azimuth_rad) {
    if (z_mm < 0.0 || z_mm > layout.spec.depth_mm + 1e-12)
        throw std::domain_error("electrode_at: z outside [0, depth]");
    for (const auto& s : layout.segments) {
        const bool in = (s.id == 5) ? (z_mm >= s.z_lower_mm && z_mm <= s.z_upper_mm)
                                    : (z_mm >= s.z_lower_mm && z_mm < s.z_upper_mm);
        if (!in) continue;
        SurfaceSite site;
        site.gap = false;
        site.segment = s.id;
        if (s.id == 1 || s.id == 5) site.quadrant = quadrant_of(azimuth_rad);
        return site;
    }
    return SurfaceSite{};
}

}  // namespace pmtrap
