#pragma once

// RF null location and its sensitivity to drive voltages and electrode edge
// positions, plus the linear prediction model built from those slopes.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pmtrap/design_values.hpp"
#include "pmtrap/field_engine.hpp"
#include "pmtrap/pseudopotential.hpp"

namespace pmtrap {

struct SaddleReport {
    double z_saddle_mm = 0.0;
    double residual_field_v_per_m = 0.0;
    double a_radial_ev_mm2 = 0.0;
    double a_axial_ev_mm2 = 0.0;
    double f_radial_khz = 0.0;
    double f_axial_khz = 0.0;
};

/// Locates the on-axis RF null in z in (1.2, 3.0) mm and characterises the
/// local pseudopotential well. Throws when the axial field has no root there.
inline SaddleReport find_rf_null(const BasisFieldSet& basis, const RfDrive& drive,
                                 const IonSpecies& ion = IonSpecies{}) {
    SaddleReport r;
    r.z_saddle_mm = detail::locate_axial_null(basis, drive.voltages());
    r.residual_field_v_per_m = basis.field(drive.voltages(), {0.0, 0.0, r.z_saddle_mm}).norm();
    const auto radial = fit_secular(basis, drive, ion, Axis::X, design::radial_fit_window_um,
                                    r.z_saddle_mm);
    const double half_axial = 0.5 * design::axial_fit_window_um.width();
    const Interval axial_window{r.z_saddle_mm * 1e3 - half_axial, r.z_saddle_mm * 1e3 + half_axial};
    const auto axial = fit_secular(basis, drive, ion, Axis::Z, axial_window, r.z_saddle_mm);
    r.a_radial_ev_mm2 = radial.fit.a_ev_mm2;
    r.a_axial_ev_mm2 = axial.fit.a_ev_mm2;
    r.f_radial_khz = radial.frequency_khz.value_or(0.0);
    r.f_axial_khz = axial.frequency_khz.value_or(0.0);
    return r;
}

/// Central-difference slope of the null position against one RF amplitude,
/// in um/V. Default step 2 V.
inline double voltage_sensitivity_um_per_v(const BasisFieldSet& basis, const RfDrive& drive,
                                           int electrode, double step_v = 2.0) {
    if (step_v <= 0.0) throw std::invalid_argument("voltage_sensitivity: step must be positive");
    RfDrive up = drive, down = drive;
    up.v(electrode) += step_v;
    down.v(electrode) -= step_v;
    double z_up = 0.0, z_down = 0.0;
    try {
        z_up = detail::locate_axial_null(basis, up.voltages());
        z_down = detail::locate_axial_null(basis, down.voltages());
    } catch (const std::runtime_error&) {
        throw std::runtime_error("voltage_sensitivity: null lost at V" + std::to_string(electrode) +
                                 " +/- " + std::to_string(step_v) + " V");
    }
    return (z_up - z_down) / (2.0 * step_v) * 1e3;
}

/// Central-difference slope of the null position against one electrode edge,
/// in um/um. Re-solves the basis fields for each perturbed layout.
inline double edge_sensitivity_um_per_um(const ElectrodeLayout& layout, const RfDrive& drive,
                                         EdgeId edge, double step_um = 10.0,
                                         const MeshParams& mesh = MeshParams::reference()) {
    if (step_um <= 0.0) throw std::invalid_argument("edge_sensitivity: step must be positive");
    const double step_mm = step_um * 1e-3;
    const auto up_layout = layout.with_edge_shift(edge, step_mm);
    const auto down_layout = layout.with_edge_shift(edge, -step_mm);
    for (const auto* l : {&up_layout, &down_layout})
        if (!layout_structurally_valid(*l))
            throw std::invalid_argument("edge_sensitivity: shifting edge " + edge.name() + " by " +
                                        std::to_string(step_um) + " um makes segments overlap");
    const auto basis_up = BasisFieldSet::solve(up_layout, mesh);
    const auto basis_down = BasisFieldSet::solve(down_layout, mesh);
    const double z_up = detail::locate_axial_null(basis_up, drive.voltages());
    const double z_down = detail::locate_axial_null(basis_down, drive.voltages());
    return (z_up - z_down) / (2.0 * step_um * 1e-3);  // mm/mm = um/um
}

/// Linear model of the null position around a reference configuration:
///   z = z0 + sum_i k_iU (V_i - V~_i) + sum_e k_e (x_e - x~_e).
/// Slopes in um/V and um/um; every parameter carries its fitted range.
struct SensitivityModel {
    double reference_null_mm = 0.0;
    std::array<double, 3> v_ref_volt{};       // electrodes 2, 3, 4
    std::array<double, 3> k_voltage_um_per_v{};
    std::array<Interval, 3> v_range_volt{};
    std::array<double, 8> edge_ref_mm{};      // movable_edges() order
    std::array<double, 8> k_edge_um_per_um{};
    std::array<Interval, 8> edge_range_mm{};

    /// The model with the published design-study slopes and ranges.
    static SensitivityModel published() {
        SensitivityModel m;
        m.reference_null_mm = design::null_position_mm;
        m.v_ref_volt = {design::v2_volt, design::v3_volt, design::v4_model_volt};
        m.k_voltage_um_per_v = {design::k2u_um_per_v, design::k3u_um_per_v, design::k4u_um_per_v};
        m.v_range_volt = {design::v2_range_volt, design::v3_range_volt, design::v4_range_volt};
        const auto& edges = design::edge_sensitivities();
        const auto ref = ElectrodeLayout::reference();
        for (std::size_t e = 0; e < edges.size(); ++e) {
            m.edge_ref_mm[e] = ref.edge_position(edges[e].edge);
            m.k_edge_um_per_um[e] = edges[e].slope_um_per_um;
            m.edge_range_mm[e] = edges[e].range_mm;
        }
        return m;
    }

    /// Null shift from voltage deviations alone (um).
    double voltage_shift_um(const RfDrive& drive) const {
        const double dv[3] = {drive.v2 - v_ref_volt[0], drive.v3 - v_ref_volt[1],
                              drive.v4 - v_ref_volt[2]};
        double s = 0.0;
        for (int i = 0; i < 3; ++i) s += k_voltage_um_per_v[static_cast<std::size_t>(i)] * dv[i];
        return s;
    }

    /// Null shift from edge deviations alone (um); edges in movable order.
    double edge_shift_um(const std::array<double, 8>& edge_positions_mm) const {
        double s = 0.0;
        for (std::size_t e = 0; e < 8; ++e)
            s += k_edge_um_per_um[e] * (edge_positions_mm[e] - edge_ref_mm[e]) * 1e3;
        return s;
    }

    void check_ranges(const RfDrive& drive, const std::array<double, 8>& edge_positions_mm) const {
        const double v[3] = {drive.v2, drive.v3, drive.v4};
        for (int i = 0; i < 3; ++i)
            if (!v_range_volt[static_cast<std::size_t>(i)].contains(v[i]))
                throw std::out_of_range("predict_saddle: V" + std::to_string(i + 2) + " = " +
                                        std::to_string(v[i]) + " V outside the fitted range");
        const auto edges = movable_edges();
        for (std::size_t e = 0; e < 8; ++e)
            if (!edge_range_mm[e].contains(edge_positions_mm[e]))
                throw std::out_of_range("predict_saddle: edge " + edges[e].name() + " = " +
                                        std::to_string(edge_positions_mm[e]) +
                                        " mm outside the fitted range");
    }
};

inline std::array<double, 8> edge_positions(const ElectrodeLayout& layout) {
    std::array<double, 8> out{};
    const auto edges = movable_edges();
    for (std::size_t e = 0; e < 8; ++e) out[e] = layout.edge_position(edges[e]);
    return out;
}

/// Exact linear evaluation of the model. With `strict_ranges`, inputs outside
/// the fitted windows raise std::out_of_range naming the parameter.
inline double predict_saddle_mm(const SensitivityModel& model, const RfDrive& drive,
                                const std::array<double, 8>& edge_positions_mm,
                                bool strict_ranges = false) {
    if (strict_ranges) model.check_ranges(drive, edge_positions_mm);
    return model.reference_null_mm +
           (model.voltage_shift_um(drive) + model.edge_shift_um(edge_positions_mm)) * 1e-3;
}

/// Sensitivity model measured from this solver at the model reference drive.
inline SensitivityModel fit_voltage_model(const BasisFieldSet& basis,
                                          const RfDrive& drive = RfDrive::model_reference(),
                                          double step_v = 2.0) {
    SensitivityModel m = SensitivityModel::published();
    m.v_ref_volt = {drive.v2, drive.v3, drive.v4};
    m.reference_null_mm = detail::locate_axial_null(basis, drive.voltages());
    for (int i = 0; i < 3; ++i)
        m.k_voltage_um_per_v[static_cast<std::size_t>(i)] =
            voltage_sensitivity_um_per_v(basis, drive, i + 2, step_v);
    m.edge_ref_mm = edge_positions(basis.layout());
    m.k_edge_um_per_um = {};  // edge slopes are filled by the sensitivity study
    return m;
}

}  // namespace pmtrap
