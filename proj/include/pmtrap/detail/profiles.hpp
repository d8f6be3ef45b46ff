#pragma once

// Near-axis representation of a solved azimuthal mode.
//
// A harmonic mode f_m(r,z) e^{im phi} behaves like r^m g(z) near the axis;
// the full small-r expansion used here is
//   f_m = r^m [ g - g'' r^2 / (4(m+1)) + ... ]
// The generator g(z) is extracted from the grid's axis edges, resampled onto
// a uniform z table, and differentiated level by level. Field evaluation near
// the axis then reduces to a handful of cubic table lookups.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pmtrap/detail/interp.hpp"
#include "pmtrap/detail/mode_solver.hpp"

namespace pmtrap::detail {

inline std::vector<double> derivative_table(const std::vector<double>& v, double dz) {
    const std::size_t n = v.size();
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (v[i + 1] - v[i - 1]) / (2.0 * dz);
    if (n >= 3) {
        d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dz);
        d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dz);
    }
    return d;
}

/// A uniform z table of g(z) and derived tables up to `Levels-1`. Level k is
/// the k-th z derivative of level 0.
template <int Levels>
struct ProfileStack {
    double z0 = 0.0, dz = 0.0;
    std::array<UniformTable, Levels> level;

    bool covers(double z, double margin) const { return level[0].covers(z, margin); }

    double eval(int k, double z) const { return level[static_cast<std::size_t>(k)].eval(z); }

    static ProfileStack from_tables(double z0, double dz,
                                    std::array<std::vector<double>, Levels> tables) {
        ProfileStack ps;
        ps.z0 = z0;
        ps.dz = dz;
        for (int k = 0; k < Levels; ++k)
            ps.level[static_cast<std::size_t>(k)] =
                UniformTable(z0, dz, std::move(tables[static_cast<std::size_t>(k)]));
        return ps;
    }
};

using ProfileM0 = ProfileStack<6>;  // c, c', ..., c''''' for the r^4 expansion
using ProfileM1 = ProfileStack<4>;  // g, g', g'', g'''
using ProfileM2 = ProfileStack<2>;  // g, g'

/// Axis samples (z ascending) collected from the two axis edges of the grid.
struct AxisSamples {
    std::vector<double> z;
    std::vector<double> v;
};

// Grid nodes crowd quadratically towards the focus corner, where sub-ppm
// solution noise would dominate divided differences; samples this close to
// the focus are dropped and the resampler bridges the hole.
inline constexpr double kFocusExcludeMm = 0.02;

/// m = 0: the axis value is the grid value on the two axis edges.
inline AxisSamples extract_axis_m0(const ParabolicDomain& dom, const Eigen::MatrixXd& psi) {
    AxisSamples s;
    for (int i = dom.ns - 1; i >= 1; --i) {
        const double sg = dom.sigma(i);
        if (0.5 * sg * sg < kFocusExcludeMm) continue;
        s.z.push_back(dom.focus_z - 0.5 * sg * sg);
        s.v.push_back(psi(i, 0));
    }
    for (int j = 1; j < dom.nt; ++j) {
        const double tu = dom.tau(j);
        if (0.5 * tu * tu < kFocusExcludeMm) continue;
        s.z.push_back(dom.focus_z + 0.5 * tu * tu);
        s.v.push_back(psi(0, j));
    }
    return s;
}

/// m >= 1: psi ~ (sigma tau)^m g(z); extract g by Richardson-extrapolating
/// psi / (sigma tau)^m from the first two off-axis lines towards the axis.
inline AxisSamples extract_axis_m(const ParabolicDomain& dom, const Eigen::MatrixXd& psi, int m) {
    auto ratio = [&](int i, int j) {
        const double rm = std::pow(dom.sigma(i) * dom.tau(j), m);
        return psi(i, j) / rm;
    };
    AxisSamples s;
    for (int i = dom.ns - 1; i >= 2; --i) {
        const double sg = dom.sigma(i);
        if (0.5 * sg * sg < kFocusExcludeMm) continue;
        s.z.push_back(dom.focus_z - 0.5 * sg * sg);
        s.v.push_back((4.0 * ratio(i, 1) - ratio(i, 2)) / 3.0);
    }
    for (int j = 2; j < dom.nt; ++j) {
        const double tu = dom.tau(j);
        if (0.5 * tu * tu < kFocusExcludeMm) continue;
        s.z.push_back(dom.focus_z + 0.5 * tu * tu);
        s.v.push_back((4.0 * ratio(1, j) - ratio(2, j)) / 3.0);
    }
    return s;
}

/// Cubic Lagrange resampling of scattered (ascending) samples onto a uniform
/// z grid. Sources are dense everywhere the targets live.
inline std::vector<double> resample_uniform(const AxisSamples& s, double z0, double dz, int n) {
    if (s.z.size() < 4) throw std::runtime_error("resample_uniform: too few source samples");
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (int t = 0; t < n; ++t) {
        const double z = z0 + dz * t;
        auto it = std::lower_bound(s.z.begin(), s.z.end(), z);
        int k = static_cast<int>(it - s.z.begin()) - 2;
        k = std::clamp(k, 0, static_cast<int>(s.z.size()) - 4);
        double acc = 0.0;
        for (int a = 0; a < 4; ++a) {
            double w = 1.0;
            for (int b = 0; b < 4; ++b) {
                if (a == b) continue;
                w *= (z - s.z[static_cast<std::size_t>(k + b)]) /
                     (s.z[static_cast<std::size_t>(k + a)] - s.z[static_cast<std::size_t>(k + b)]);
            }
            acc += w * s.v[static_cast<std::size_t>(k + a)];
        }
        out[static_cast<std::size_t>(t)] = acc;
    }
    return out;
}

}  // namespace pmtrap::detail
