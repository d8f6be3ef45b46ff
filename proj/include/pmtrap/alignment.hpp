#pragma once

// Inverse problem: find RF voltage corrections that bring the null back to
// the optical focus after geometry (manufacturing) deviations.
//
// The linear model gives one equation in three unknowns,
//   k2U dV2 + k3U dV3 + k4U dV4 = target - y0 - dy_st,
// solved in closed form: minimum-norm via the pseudoinverse of the single
// row, single-electrode division, or a weighted minimum.

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pmtrap/saddle.hpp"

namespace pmtrap {

enum class AlignmentMode { LeastNorm, SingleElectrode, Weighted };

struct AlignmentProblem {
    SensitivityModel model = SensitivityModel::published();
    /// Edge deviations from the model reference, um, movable_edges() order.
    std::array<double, 8> edge_deviation_um{};
    double target_mm = design::null_position_mm;
    AlignmentMode mode = AlignmentMode::LeastNorm;
    int single_electrode = 2;                 // SingleElectrode mode
    std::array<double, 3> weights{1.0, 1.0, 1.0};  // Weighted mode
    bool allow_extrapolation = false;         // permit inputs/solutions outside ranges

    void set_deviation(EdgeId edge, double um) {
        const auto edges = movable_edges();
        for (std::size_t e = 0; e < edges.size(); ++e)
            if (edges[e].segment == edge.segment && edges[e].upper == edge.upper) {
                edge_deviation_um[e] = um;
                return;
            }
        throw std::invalid_argument("alignment: edge " + edge.name() + " is not movable");
    }

    std::array<double, 8> deviated_edges_mm() const {
        std::array<double, 8> out = model.edge_ref_mm;
        for (std::size_t e = 0; e < 8; ++e) out[e] += edge_deviation_um[e] * 1e-3;
        return out;
    }
};

struct AlignmentSolution {
    std::array<double, 3> dv_volt{};       // corrections on V2, V3, V4
    double mismatch_um = 0.0;              // null-focus offset being cancelled
    double predicted_residual_um = 0.0;    // linear-model residual after correction
    bool within_ranges = true;
};

/// Raised when the required correction leaves the fitted voltage windows; the
/// unconstrained solution rides along for inspection.
class InfeasibleAlignment : public std::runtime_error {
public:
    InfeasibleAlignment(const std::string& what, AlignmentSolution sol)
        : std::runtime_error(what), solution(std::move(sol)) {}
    AlignmentSolution solution;
};

inline AlignmentSolution solve_alignment(const AlignmentProblem& problem) {
    const auto& m = problem.model;
    if (!problem.allow_extrapolation) {
        const auto edges = movable_edges();
        const auto pos = problem.deviated_edges_mm();
        for (std::size_t e = 0; e < 8; ++e)
            if (!m.edge_range_mm[e].contains(pos[e]))
                throw std::out_of_range("alignment: deviation puts edge " + edges[e].name() +
                                        " outside the fitted range");
    }

    const double dy_st_um = m.edge_shift_um(problem.deviated_edges_mm());
    const double needed_um = (problem.target_mm - m.reference_null_mm) * 1e3 - dy_st_um;
    const auto& k = m.k_voltage_um_per_v;

    AlignmentSolution sol;
    sol.mismatch_um = -needed_um;
    switch (problem.mode) {
        case AlignmentMode::LeastNorm: {
            const double k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if (k2 <= 0.0) throw std::invalid_argument("alignment: zero sensitivity row");
            for (int i = 0; i < 3; ++i)
                sol.dv_volt[static_cast<std::size_t>(i)] = k[static_cast<std::size_t>(i)] * needed_um / k2;
            break;
        }
        case AlignmentMode::SingleElectrode: {
            const int i = problem.single_electrode - 2;
            if (i < 0 || i > 2)
                throw std::invalid_argument("alignment: single electrode must be 2, 3 or 4");
            if (k[static_cast<std::size_t>(i)] == 0.0)
                throw std::invalid_argument("alignment: electrode V" +
                                            std::to_string(problem.single_electrode) +
                                            " has zero sensitivity");
            sol.dv_volt[static_cast<std::size_t>(i)] = needed_um / k[static_cast<std::size_t>(i)];
            break;
        }
        case AlignmentMode::Weighted: {
            double denom = 0.0;
            for (int i = 0; i < 3; ++i) {
                if (problem.weights[static_cast<std::size_t>(i)] <= 0.0)
                    throw std::invalid_argument("alignment: weights must be positive");
                denom += k[static_cast<std::size_t>(i)] * k[static_cast<std::size_t>(i)] /
                         problem.weights[static_cast<std::size_t>(i)];
            }
            if (denom <= 0.0) throw std::invalid_argument("alignment: zero sensitivity row");
            for (int i = 0; i < 3; ++i)
                sol.dv_volt[static_cast<std::size_t>(i)] =
                    (k[static_cast<std::size_t>(i)] / problem.weights[static_cast<std::size_t>(i)]) *
                    needed_um / denom;
            break;
        }
    }

    double applied = 0.0;
    for (int i = 0; i < 3; ++i) applied += k[static_cast<std::size_t>(i)] * sol.dv_volt[static_cast<std::size_t>(i)];
    sol.predicted_residual_um = std::abs(applied - needed_um);

    for (int i = 0; i < 3; ++i) {
        const double v = m.v_ref_volt[static_cast<std::size_t>(i)] + sol.dv_volt[static_cast<std::size_t>(i)];
        if (!m.v_range_volt[static_cast<std::size_t>(i)].contains(v)) sol.within_ranges = false;
    }
    if (!sol.within_ranges && !problem.allow_extrapolation)
        throw InfeasibleAlignment("alignment: correction leaves the fitted voltage windows", sol);
    return sol;
}

struct VerifiedAlignment {
    double residual_um = 0.0;
    double z_saddle_mm = 0.0;
    double f_radial_khz = 0.0;   // secular frequencies after correction,
    double f_axial_khz = 0.0;    // reported so the side effect is visible
};

/// Re-solves the perturbed layout, applies reference + correction voltages
/// and measures how far the null actually lands from the target.
inline VerifiedAlignment verify_alignment(const ElectrodeLayout& perturbed_layout,
                                          const AlignmentProblem& problem,
                                          const AlignmentSolution& solution,
                                          const MeshParams& mesh = MeshParams::reference(),
                                          const IonSpecies& ion = IonSpecies{}) {
    const auto basis = BasisFieldSet::solve(perturbed_layout, mesh);
    RfDrive drive;
    drive.v2 = problem.model.v_ref_volt[0] + solution.dv_volt[0];
    drive.v3 = problem.model.v_ref_volt[1] + solution.dv_volt[1];
    drive.v4 = problem.model.v_ref_volt[2] + solution.dv_volt[2];
    const auto report = find_rf_null(basis, drive, ion);
    VerifiedAlignment out;
    out.z_saddle_mm = report.z_saddle_mm;
    out.residual_um = std::abs(report.z_saddle_mm - problem.target_mm) * 1e3;
    out.f_radial_khz = report.f_radial_khz;
    out.f_axial_khz = report.f_axial_khz;
    return out;
}

}  // namespace pmtrap
