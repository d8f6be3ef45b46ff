#pragma once

// Ponderomotive pseudopotential of the RF drive, quadratic well fits along
// the principal axes, and the conversion to secular frequencies.
//
// The time-averaged potential seen by a slow ion in the oscillating field is
//   Phi = (Q |E_RF|)^2 / (4 m Omega^2),
// expressed here in eV. A quadratic fit Phi = a s^2 + ... along an axis gives
// the secular frequency through omega = sqrt(2 a / m) once the energy
// curvature a is converted from eV/mm^2 to J/m^2.

#include <cmath>
#include <optional>
#include <stdexcept>

#include "pmtrap/common.hpp"
#include "pmtrap/design_values.hpp"
#include "pmtrap/field_engine.hpp"

namespace pmtrap {

struct IonSpecies {
    double mass_u = design::ion_mass_u;
    double charge_e = design::ion_charge_e;

    double mass_kg() const { return mass_u * constants::atomic_mass_kg; }
    double charge_c() const { return charge_e * constants::elementary_charge_c; }
};

/// RF drive: frequency and the three band amplitudes (quasi-static model).
struct RfDrive {
    double frequency_mhz = design::rf_frequency_mhz;
    double v2 = design::v2_volt;
    double v3 = design::v3_volt;
    double v4 = design::v4_volt;

    double omega_rad_s() const { return 2.0 * constants::pi * frequency_mhz * 1e6; }
    ElectrodeVoltages voltages() const { return ElectrodeVoltages::rf(v2, v3, v4); }

    double v(int electrode) const {
        switch (electrode) {
            case 2: return v2;
            case 3: return v3;
            case 4: return v4;
        }
        throw std::invalid_argument("RfDrive: electrode must be 2, 3 or 4");
    }
    double& v(int electrode) {
        switch (electrode) {
            case 2: return v2;
            case 3: return v3;
            case 4: return v4;
        }
        throw std::invalid_argument("RfDrive: electrode must be 2, 3 or 4");
    }

    /// Quoted operating point (V4 = 712.75 V).
    static RfDrive operating_point() { return {}; }
    /// Reference point of the linear sensitivity model (V4 = 708.00 V).
    static RfDrive model_reference() {
        RfDrive d;
        d.v4 = design::v4_model_volt;
        return d;
    }

    /// True when every amplitude lies inside the fitted model windows.
    bool within_model_ranges() const {
        return design::v2_range_volt.contains(v2) && design::v3_range_volt.contains(v3) &&
               design::v4_range_volt.contains(v4);
    }
};

/// Pseudopotential (eV) of the RF drive at a point; DC electrodes grounded.
inline double pseudo_at(const BasisFieldSet& basis, const RfDrive& drive, const IonSpecies& ion,
                        const Vec3& point_mm) {
    const Vec3 e = basis.field(drive.voltages(), point_mm);  // V/m
    const double omega = drive.omega_rad_s();
    const double qe = ion.charge_e * constants::elementary_charge_c;
    return ion.charge_e * qe * e.dot(e) / (4.0 * ion.mass_kg() * omega * omega);
}

/// Closed-form estimate of the well depth, Q V0^2 / (4 m r0^2 Omega^2) in eV
/// with Q in elementary charges.
inline double closed_form_depth_ev(const IonSpecies& ion, double v0_volt, double r0_mm,
                                   double frequency_mhz) {
    if (v0_volt < 0.0 || r0_mm <= 0.0 || frequency_mhz <= 0.0)
        throw std::domain_error("closed_form_depth: inputs must be positive");
    const double omega = 2.0 * constants::pi * frequency_mhz * 1e6;
    const double r0_m = r0_mm * 1e-3;
    return ion.charge_e * v0_volt * v0_volt * constants::elementary_charge_c /
           (4.0 * ion.mass_kg() * r0_m * r0_m * omega * omega);
}

/// Distance from the focus to the nearer RF edge bounding the focus gap; the
/// conventional r0 scale of the closed-form depth.
inline double focus_gap_rf_distance_mm(const ElectrodeLayout& layout) {
    const double f = layout.spec.focal_length_mm;
    auto edge_distance = [&](double z_edge) {
        return std::sqrt(4.0 * f * z_edge + (z_edge - f) * (z_edge - f));
    };
    return std::min(edge_distance(layout.segment(3).z_upper_mm),
                    edge_distance(layout.segment(4).z_lower_mm));
}

enum class Axis { X, Y, Z };

inline const char* axis_name(Axis a) {
    switch (a) {
        case Axis::X: return "x";
        case Axis::Y: return "y";
        default: return "z";
    }
}

/// Least-squares quadratic fit of the pseudopotential along one axis.
struct QuadraticFit {
    Axis axis = Axis::X;
    Interval window_um;               // coordinates along the axis
    double a_ev_mm2 = 0.0;            // curvature coefficient
    double slope_ev_mm = 0.0;
    double offset_ev = 0.0;
    double rms_residual_ev = 0.0;
    double edge_value_ev = 0.0;       // fitted well value at the window edge
    double vertex_mm = 0.0;           // minimum position along the axis
    bool trapped = false;             // positive curvature
    bool clean = false;               // residual within 2% of the edge value
};

struct SecularFit {
    QuadraticFit fit;
    std::optional<double> frequency_khz;  // absent for untrapped axes
};

/// a [eV/mm^2] -> secular frequency [kHz] for the given ion.
inline double secular_frequency_khz(double a_ev_mm2, const IonSpecies& ion) {
    const double a_j_m2 = a_ev_mm2 * constants::elementary_charge_c * 1e6;
    return std::sqrt(2.0 * a_j_m2 / ion.mass_kg()) / (2.0 * constants::pi) / 1e3;
}

namespace detail {

/// Root of the on-axis axial RF field in (z_lo, z_hi); used by the fit when
/// no expansion point is supplied. Throws when the field does not change sign.
inline double locate_axial_null(const BasisFieldSet& basis, const ElectrodeVoltages& volts,
                                double z_lo = 1.2, double z_hi = 3.0) {
    const int n = 360;
    double max_abs = 0.0;
    for (int i = 0; i <= 8; ++i)
        max_abs = std::max(max_abs,
                           std::abs(basis.axial_field_z(volts, z_lo + (z_hi - z_lo) * i / 8.0)));
    if (max_abs < 1e-12)
        throw std::runtime_error("no RF null in range: the axial field is identically zero");
    double prev_z = z_lo, prev_f = basis.axial_field_z(volts, z_lo);
    double best_z = std::numeric_limits<double>::quiet_NaN();
    double best_dist = std::numeric_limits<double>::infinity();
    const double focus = basis.layout().spec.focus_z_mm();
    for (int i = 1; i <= n; ++i) {
        const double z = z_lo + (z_hi - z_lo) * i / n;
        const double f = basis.axial_field_z(volts, z);
        if (prev_f == 0.0 || prev_f * f < 0.0) {
            double lo = prev_z, hi = z, flo = prev_f;
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = basis.axial_field_z(volts, mid);
                if (flo * fm <= 0.0) hi = mid;
                else {
                    lo = mid;
                    flo = fm;
                }
            }
            const double root = 0.5 * (lo + hi);
            if (std::abs(root - focus) < best_dist) {
                best_dist = std::abs(root - focus);
                best_z = root;
            }
        }
        prev_z = z;
        prev_f = f;
    }
    if (!std::isfinite(best_z))
        throw std::runtime_error("no RF null in range: the axial field does not change sign in (" +
                                 std::to_string(z_lo) + ", " + std::to_string(z_hi) + ") mm");
    return best_z;
}

}  // namespace detail

/// Fits the pseudopotential along `axis` over `window_um` (81 samples). For
/// the transverse axes the window is centred on the axis at the null plane;
/// for z the window is absolute. `center_z_mm` overrides the internally
/// located null (callers that already ran the saddle analysis pass it in).
inline SecularFit fit_secular(const BasisFieldSet& basis, const RfDrive& drive,
                              const IonSpecies& ion, Axis axis, Interval window_um,
                              double center_z_mm = std::numeric_limits<double>::quiet_NaN()) {
    const double z0 = std::isfinite(center_z_mm)
                          ? center_z_mm
                          : detail::locate_axial_null(basis, drive.voltages());
    const double expected_center = (axis == Axis::Z) ? z0 * 1e3 : 0.0;
    const double half_width = 0.5 * window_um.width();
    if (half_width <= 0.0) throw std::invalid_argument("fit_secular: empty window");
    if (std::abs(window_um.center() - expected_center) > 0.05 * half_width)
        throw std::invalid_argument("fit_secular: window is not centred on the RF null");

    constexpr int n_samples = 81;
    double sx4 = 0, sx3 = 0, sx2 = 0, sx1 = 0, sy2 = 0, sy1 = 0, sy0 = 0;
    std::array<double, n_samples> xs{}, ys{};
    for (int i = 0; i < n_samples; ++i) {
        const double coord_um = window_um.lo + window_um.width() * i / (n_samples - 1);
        const double coord_mm = coord_um * 1e-3;
        Vec3 p{0.0, 0.0, z0};
        switch (axis) {
            case Axis::X: p.x = coord_mm; break;
            case Axis::Y: p.y = coord_mm; break;
            case Axis::Z: p.z = coord_mm; break;
        }
        if (!basis.inside(p))
            throw std::domain_error("fit_secular: window extends outside the trap volume");
        const double x = coord_mm - window_um.center() * 1e-3;
        const double y = pseudo_at(basis, drive, ion, p);
        xs[static_cast<std::size_t>(i)] = x;
        ys[static_cast<std::size_t>(i)] = y;
        const double x2 = x * x;
        sx4 += x2 * x2;
        sx3 += x2 * x;
        sx2 += x2;
        sx1 += x;
        sy2 += y * x2;
        sy1 += y * x;
        sy0 += y;
    }
    Eigen::Matrix3d m;
    m << sx4, sx3, sx2, sx3, sx2, sx1, sx2, sx1, static_cast<double>(n_samples);
    const Eigen::Vector3d rhs(sy2, sy1, sy0);
    const Eigen::Vector3d abc = m.ldlt().solve(rhs);

    QuadraticFit fit;
    fit.axis = axis;
    fit.window_um = window_um;
    fit.a_ev_mm2 = abc(0);
    fit.slope_ev_mm = abc(1);
    fit.offset_ev = abc(2);
    double ss = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        const double x = xs[static_cast<std::size_t>(i)];
        const double r = ys[static_cast<std::size_t>(i)] - (abc(0) * x * x + abc(1) * x + abc(2));
        ss += r * r;
    }
    fit.rms_residual_ev = std::sqrt(ss / n_samples);
    const double he = half_width * 1e-3;
    fit.edge_value_ev = abc(0) * he * he;
    fit.trapped = abc(0) > 0.0;
    fit.vertex_mm = window_um.center() * 1e-3 -
                    (fit.trapped ? abc(1) / (2.0 * abc(0)) : 0.0);
    fit.clean = fit.trapped && fit.rms_residual_ev <= 0.02 * std::abs(fit.edge_value_ev);

    SecularFit out;
    out.fit = fit;
    if (fit.trapped) out.frequency_khz = secular_frequency_khz(fit.a_ev_mm2, ion);
    return out;
}

}  // namespace pmtrap
