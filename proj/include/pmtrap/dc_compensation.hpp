#pragma once

// DC micromotion compensation: three voltage pairs on the eight quadrant
// pads move the ion independently along x, y and z.
//
// Pair patterns (signs on pads a, b, c, d of both DC segments): +U_i goes to
// the electrodes on the positive side of axis i, so a positive pair voltage
// pushes the ion towards -i and every diagonal slope is negative.
//   x: +U1 on a, d / -U1 on b, c          (half-space x > 0 vs x < 0)
//   y: +U2 on a, b / -U2 on c, d
//   z: +U3 on all of segment 5 / -U3 on all of segment 1
// The applied pad voltage is the signed sum of the three pairs plus the
// static segment offsets.

#include <array>
#include <cmath>
#include <stdexcept>

#include "pmtrap/pseudopotential.hpp"

namespace pmtrap {

/// Static DC operating offsets of the pad segments.
struct DcOffsets {
    double v1_volt = design::v1_volt;
    double v5_volt = design::v5_volt;
};

/// Pair voltages (V) for the three compensation directions.
struct PairVoltages {
    double u1 = 0.0, u2 = 0.0, u3 = 0.0;
};

/// Full pad assignment for a pair setting: signed sums plus static offsets.
/// RF bands are left at 0 V (this is the DC part of the drive).
inline ElectrodeVoltages pad_voltages(const PairVoltages& u, const DcOffsets& offsets = {}) {
    ElectrodeVoltages v;
    const double sx[4] = {+1.0, -1.0, -1.0, +1.0};  // pads a, b, c, d
    const double sy[4] = {+1.0, +1.0, -1.0, -1.0};
    for (int q = 0; q < 4; ++q) {
        const auto quad = static_cast<Quadrant>(q);
        v.pad({1, quad}) = sx[q] * u.u1 + sy[q] * u.u2 - u.u3 + offsets.v1_volt;
        v.pad({5, quad}) = sx[q] * u.u1 + sy[q] * u.u2 + u.u3 + offsets.v5_volt;
    }
    return v;
}

/// Linear map from pair voltages to ion displacement, um/V.
struct CompensationMatrix {
    // column j = displacement per volt of pair j (x, y, z patterns)
    std::array<std::array<double, 3>, 3> m{};

    double& at(int row, int col) { return m[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)]; }
    double at(int row, int col) const { return m[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)]; }

    static CompensationMatrix published() {
        CompensationMatrix c;
        c.at(0, 0) = design::dc_slope_x_um_per_v;
        c.at(1, 1) = design::dc_slope_y_um_per_v;
        c.at(2, 2) = design::dc_slope_z_um_per_v;
        return c;
    }
};

/// displacement (um) = M * U.
inline Vec3 displacement_from_voltages(const CompensationMatrix& m, const PairVoltages& u) {
    const double uv[3] = {u.u1, u.u2, u.u3};
    Vec3 d;
    d.x = m.at(0, 0) * uv[0] + m.at(0, 1) * uv[1] + m.at(0, 2) * uv[2];
    d.y = m.at(1, 0) * uv[0] + m.at(1, 1) * uv[1] + m.at(1, 2) * uv[2];
    d.z = m.at(2, 0) * uv[0] + m.at(2, 1) * uv[1] + m.at(2, 2) * uv[2];
    return d;
}

/// U = M^{-1} * displacement; throws on a singular matrix.
inline PairVoltages voltages_for_displacement(const CompensationMatrix& m, const Vec3& target_um) {
    Eigen::Matrix3d a;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) a(r, c) = m.at(r, c);
    const double det = a.determinant();
    const double scale = a.cwiseAbs().maxCoeff();
    if (scale == 0.0 || std::abs(det) < 1e-12 * scale * scale * scale)
        throw std::invalid_argument("voltages_for_displacement: compensation matrix is singular");
    const Eigen::Vector3d u = a.partialPivLu().solve(Eigen::Vector3d(target_um.x, target_um.y, target_um.z));
    return {u(0), u(1), u(2)};
}

namespace detail {

/// Total low-frequency potential seen by the ion: RF pseudopotential plus the
/// DC potential energy, in eV.
inline double total_potential_ev(const BasisFieldSet& basis, const RfDrive& drive,
                                 const ElectrodeVoltages& dc, const IonSpecies& ion, const Vec3& p) {
    return pseudo_at(basis, drive, ion, p) + ion.charge_e * basis.potential(dc, p);
}

/// Newton minimization of the total potential with numeric derivatives.
inline Vec3 minimize_total_potential(const BasisFieldSet& basis, const RfDrive& drive,
                                     const ElectrodeVoltages& dc, const IonSpecies& ion,
                                     Vec3 start, double tol_mm = 1e-7) {
    const double d = 2e-3;  // difference step, mm
    Vec3 x = start;
    for (int iter = 0; iter < 60; ++iter) {
        auto f = [&](const Vec3& p) { return total_potential_ev(basis, drive, dc, ion, p); };
        const double f0 = f(x);
        Eigen::Vector3d g;
        Eigen::Matrix3d h;
        const Vec3 ex{d, 0, 0}, ey{0, d, 0}, ez{0, 0, d};
        const std::array<Vec3, 3> e{ex, ey, ez};
        std::array<double, 3> fp{}, fm{};
        for (int i = 0; i < 3; ++i) {
            fp[static_cast<std::size_t>(i)] = f(x + e[static_cast<std::size_t>(i)]);
            fm[static_cast<std::size_t>(i)] = f(x - e[static_cast<std::size_t>(i)]);
            g(i) = (fp[static_cast<std::size_t>(i)] - fm[static_cast<std::size_t>(i)]) / (2.0 * d);
            h(i, i) = (fp[static_cast<std::size_t>(i)] - 2.0 * f0 + fm[static_cast<std::size_t>(i)]) / (d * d);
        }
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j) {
                const double fpp = f(x + e[static_cast<std::size_t>(i)] + e[static_cast<std::size_t>(j)]);
                const double fpm = f(x + e[static_cast<std::size_t>(i)] - e[static_cast<std::size_t>(j)]);
                const double fmp = f(x - e[static_cast<std::size_t>(i)] + e[static_cast<std::size_t>(j)]);
                const double fmm = f(x - e[static_cast<std::size_t>(i)] - e[static_cast<std::size_t>(j)]);
                h(i, j) = h(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * d * d);
            }
        Eigen::Vector3d step = h.ldlt().solve(-g);
        if (!step.allFinite()) throw std::runtime_error("compensation: untrapped configuration");
        // step length capped outside the quadratic bowl
        const double max_step = 0.05;
        const double n = step.norm();
        if (n > max_step) step *= max_step / n;
        x += Vec3{step(0), step(1), step(2)};
        if (n < tol_mm) return x;
    }
    throw std::runtime_error("compensation: equilibrium search did not converge");
}

}  // namespace detail

/// Probes each pair pattern with a small test voltage and measures the slope
/// of the total-potential minimum, filling the full 3x3 matrix.
///
/// Slopes are defined about the bare RF null, so the probe omits the static
/// segment offsets by default; those shift the operating point (and soften
/// the radial well) and are composed separately by pad_voltages().
inline CompensationMatrix simulate_compensation_matrix(const BasisFieldSet& basis,
                                                       const RfDrive& drive, const IonSpecies& ion,
                                                       double test_voltage_v = 1e-3,
                                                       const DcOffsets& offsets = {0.0, 0.0}) {
    const double z0 = detail::locate_axial_null(basis, drive.voltages());
    const Vec3 start{0.0, 0.0, z0};
    const auto probe = [&](const PairVoltages& u) {
        return detail::minimize_total_potential(basis, drive, pad_voltages(u, offsets), ion, start);
    };
    // trapped-configuration precondition: curvatures at the null are positive
    {
        const auto fit = fit_secular(basis, drive, ion, Axis::X, design::radial_fit_window_um, z0);
        if (!fit.fit.trapped) throw std::runtime_error("compensation: untrapped configuration");
    }
    CompensationMatrix out;
    for (int col = 0; col < 3; ++col) {
        PairVoltages up, dn;
        (col == 0 ? up.u1 : col == 1 ? up.u2 : up.u3) = test_voltage_v;
        (col == 0 ? dn.u1 : col == 1 ? dn.u2 : dn.u3) = -test_voltage_v;
        const Vec3 a = probe(up), b = probe(dn);
        const Vec3 slope = (a - b) * (1.0 / (2.0 * test_voltage_v)) * 1e3;  // um/V
        out.at(0, col) = slope.x;
        out.at(1, col) = slope.y;
        out.at(2, col) = slope.z;
    }
    return out;
}

}  // namespace pmtrap
