#pragma once

// Independent verification solver: second-order finite differences on a 3-D
// Cartesian grid, with Shortley-Weller arm shortening where the stencil cuts
// the paraboloid, solved matrix-free with Jacobi-preconditioned BiCGSTAB.
//
// The open aperture is closed by a grounded lid well above the electrode
// region; its influence at the focus decays through the grounded horn. The
// boundary potential (electrode bands, pads by azimuth, gap ramps) is
// evaluated exactly at the sub-cell crossing points, so gaps narrower than
// the grid spacing are still represented in the boundary data.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmtrap/detail/interp.hpp"
#include "pmtrap/electrodes.hpp"
#include "pmtrap/geometry.hpp"

namespace pmtrap {

struct OracleParams {
    double spacing_mm = 0.25;
    double z_top_mm = 14.0;
    double box_halfwidth_mm = 0.0;  // 0 = derive from z_top
    double memory_budget_mb = 1024.0;
    double tolerance = 1e-8;
    int max_iterations = 40000;
};

class OracleSolution {
public:
    double spacing_mm = 0.0;
    int nx = 0, ny = 0, nz = 0;
    int iterations = 0;
    double relative_residual = 0.0;

    /// On-axis potential, cubic interpolation between the axis nodes.
    double axial_potential(double z_mm) const { return axis_.eval(z_mm); }
    const detail::UniformTable& axis_table() const { return axis_; }

    double node_potential(int i, int j, int k) const {
        return u_[index(i, j, k)];
    }

private:
    friend OracleSolution fd_oracle_solve(const ElectrodeLayout&, const ElectrodeVoltages&,
                                          const OracleParams&);
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * static_cast<std::size_t>(ny) +
                static_cast<std::size_t>(j)) * static_cast<std::size_t>(nx) +
               static_cast<std::size_t>(i);
    }
    std::vector<double> u_;
    detail::UniformTable axis_;
};

namespace detail {

struct OracleStencil {
    // arm order: -x +x -y +y -z +z
    float theta[6];
    double bval[6];
};

}  // namespace detail

/// Solves Laplace's equation for the assignment on a Cartesian grid. Refuses
/// when the requested grid exceeds the memory budget.
inline OracleSolution fd_oracle_solve(const ElectrodeLayout& layout, const ElectrodeVoltages& volts,
                                      const OracleParams& params = {}) {
    if (params.spacing_mm <= 0.0) throw std::invalid_argument("fd_oracle: spacing must be positive");
    const double h = params.spacing_mm;
    const double f = layout.spec.focal_length_mm;
    const double z_top = params.z_top_mm;
    if (z_top < layout.segment(4).z_upper_mm + 1.0)
        throw std::invalid_argument("fd_oracle: the lid must sit well above the RF bands");
    double half = params.box_halfwidth_mm;
    if (half <= 0.0) half = std::sqrt(4.0 * f * z_top) + 2.0 * h;
    const int nh = static_cast<int>(std::ceil(half / h));
    const int nx = 2 * nh + 1, ny = nx;
    const int nz = static_cast<int>(std::ceil(z_top / h)) + 1;

    const std::size_t n_nodes = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
                                static_cast<std::size_t>(nz);
    // eight double vectors plus classification and boundary-stencil storage
    const double est_mb = static_cast<double>(n_nodes) * (8.0 * 8.0 + 4.0) / 1e6;
    if (est_mb > params.memory_budget_mb)
        throw std::invalid_argument("fd_oracle: grid " + std::to_string(nx) + "x" +
                                    std::to_string(ny) + "x" + std::to_string(nz) + " needs ~" +
                                    std::to_string(static_cast<int>(est_mb)) +
                                    " MB, over the budget of " +
                                    std::to_string(static_cast<int>(params.memory_budget_mb)) + " MB");

    auto x_of = [&](int i) { return -nh * h + i * h; };
    auto z_of = [&](int k) { return k * h; };
    auto surface_z = [&](double x, double y) { return (x * x + y * y) / (4.0 * f); };
    auto boundary_value = [&](double x, double y, double z) {
        return surface_potential(layout, volts, z, std::atan2(y, x));
    };

    OracleSolution sol;
    sol.spacing_mm = h;
    sol.nx = nx;
    sol.ny = ny;
    sol.nz = nz;

    std::vector<std::int32_t> cls(n_nodes, -1);  // -1 exterior, 0 plain interior, >0 stencil id
    std::vector<detail::OracleStencil> stencils(1);
    auto inside = [&](int i, int j, int k) {
        if (k <= 0 || k >= nz - 1 || i <= 0 || i >= nx - 1 || j <= 0 || j >= ny - 1) return false;
        const double x = x_of(i), y = x_of(j), z = z_of(k);
        return z > surface_z(x, y);
    };

    const double theta_snap = 0.01;  // nodes this close to the wall become boundary
    std::vector<std::size_t> interior;
    for (int k = 1; k < nz - 1; ++k)
        for (int j = 1; j < ny - 1; ++j)
            for (int i = 1; i < nx - 1; ++i) {
                if (!inside(i, j, k)) continue;
                const double x = x_of(i), y = x_of(j), z = z_of(k);
                const double dz_wall = z - surface_z(x, y);
                if (dz_wall < theta_snap * h) continue;  // stays Dirichlet (exterior class)
                cls[sol.index(i, j, k)] = 0;
                interior.push_back(sol.index(i, j, k));
            }

    // classify boundary-adjacent nodes and build their stencils
    auto arm = [&](int i, int j, int k, int a, double& theta, double& bval) {
        static const int di[6] = {-1, 1, 0, 0, 0, 0};
        static const int dj[6] = {0, 0, -1, 1, 0, 0};
        static const int dk[6] = {0, 0, 0, 0, -1, 1};
        const int i2 = i + di[a], j2 = j + dj[a], k2 = k + dk[a];
        if (cls[sol.index(i2, j2, k2)] >= 0) {
            theta = 1.0;
            bval = 0.0;
            return false;
        }
        const double x = x_of(i), y = x_of(j), z = z_of(k);
        double t = 1.0, bx = x, by = y, bz = z;
        if (a == 5 && k2 >= nz - 1) {
            t = 1.0;
            bz = z_of(nz - 1);
            theta = t;
            bval = 0.0;  // grounded lid
            return true;
        }
        if (a == 4) {
            const double zs = surface_z(x, y);
            t = (z - zs) / h;
            bz = zs;
        } else if (a == 0 || a == 1) {
            const double s = 4.0 * f * z - y * y;
            const double xc = (a == 1) ? std::sqrt(std::max(s, 0.0)) : -std::sqrt(std::max(s, 0.0));
            t = std::abs(xc - x) / h;
            bx = xc;
        } else if (a == 2 || a == 3) {
            const double s = 4.0 * f * z - x * x;
            const double yc = (a == 3) ? std::sqrt(std::max(s, 0.0)) : -std::sqrt(std::max(s, 0.0));
            t = std::abs(yc - y) / h;
            by = yc;
        } else {
            // +z arm leaving through the side boxes cannot happen inside the horn
            t = 1.0;
        }
        theta = std::min(std::max(t, theta_snap), 1.0);
        bval = boundary_value(bx, by, bz);
        return true;
    };

    std::vector<double> rhs(n_nodes, 0.0), diag(n_nodes, 1.0);
    for (std::size_t idx = 0; idx < interior.size(); ++idx) {
        const std::size_t p = interior[idx];
        const int k = static_cast<int>(p / (static_cast<std::size_t>(nx) * ny));
        const int j = static_cast<int>((p / nx) % static_cast<std::size_t>(ny));
        const int i = static_cast<int>(p % static_cast<std::size_t>(nx));
        detail::OracleStencil st{};
        bool cut = false;
        double th[6];
        for (int a = 0; a < 6; ++a) {
            double t, bv;
            cut |= arm(i, j, k, a, t, bv);
            st.theta[a] = static_cast<float>(t);
            st.bval[a] = bv;
            th[a] = t;
        }
        // operator rows are scaled by h^2: plain interior rows are the usual
        // (sum of neighbours - 6 u); cut rows use the Shortley-Weller weights
        double d = 0.0, b = 0.0;
        for (int ax = 0; ax < 3; ++ax) {
            const double tm = th[2 * ax], tp = th[2 * ax + 1];
            d -= 2.0 / (tm * tp);
        }
        static const int di[6] = {-1, 1, 0, 0, 0, 0};
        static const int dj[6] = {0, 0, -1, 1, 0, 0};
        static const int dk[6] = {0, 0, 0, 0, -1, 1};
        for (int a = 0; a < 6; ++a) {
            const int ax = a / 2;
            const double tm = th[2 * ax], tp = th[2 * ax + 1];
            const double coef = 2.0 / (th[a] * (tm + tp));
            if (cls[sol.index(i + di[a], j + dj[a], k + dk[a])] < 0) b -= coef * st.bval[a];
        }
        rhs[p] = b;
        diag[p] = d;
        if (cut) {
            cls[p] = static_cast<std::int32_t>(stencils.size());
            stencils.push_back(st);
        }
    }

    // matrix-vector product of the h^2-scaled operator
    const std::size_t stride_j = static_cast<std::size_t>(nx);
    const std::size_t stride_k = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
    auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
        for (std::size_t ii = 0; ii < interior.size(); ++ii) {
            const std::size_t p = interior[ii];
            const std::int32_t c = cls[p];
            if (c == 0) {
                out[p] = v[p - 1] + v[p + 1] + v[p - stride_j] + v[p + stride_j] +
                         v[p - stride_k] + v[p + stride_k] - 6.0 * v[p];
            } else {
                const auto& st = stencils[static_cast<std::size_t>(c)];
                const std::size_t nb[6] = {p - 1, p + 1, p - stride_j, p + stride_j,
                                           p - stride_k, p + stride_k};
                double acc = 0.0;
                for (int ax = 0; ax < 3; ++ax) {
                    const double tm = st.theta[2 * ax], tp = st.theta[2 * ax + 1];
                    const double denom = tm + tp;
                    const double cm = 2.0 / (tm * denom), cp = 2.0 / (tp * denom);
                    acc -= (cm + cp) * v[p];
                    if (cls[nb[2 * ax]] >= 0) acc += cm * v[nb[2 * ax]];
                    if (cls[nb[2 * ax + 1]] >= 0) acc += cp * v[nb[2 * ax + 1]];
                }
                out[p] = acc;
            }
        }
    };

    auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (const std::size_t p : interior) s += a[p] * b[p];
        return s;
    };

    // Jacobi-preconditioned BiCGSTAB on the interior unknowns
    std::vector<double> u(n_nodes, 0.0), r(n_nodes, 0.0), r0(n_nodes, 0.0), pvec(n_nodes, 0.0),
        vvec(n_nodes, 0.0), svec(n_nodes, 0.0), tvec(n_nodes, 0.0), y(n_nodes, 0.0),
        zvec(n_nodes, 0.0);
    for (const std::size_t p : interior) r[p] = rhs[p];
    const double bnorm = std::sqrt(dot(r, r));
    if (bnorm > 0.0) {
        for (const std::size_t p : interior) r0[p] = r[p];
        double rho = 1.0, alpha = 1.0, omega = 1.0;
        int it = 0;
        double resid = 1.0;
        while (it < params.max_iterations) {
            const double rho1 = dot(r0, r);
            if (rho1 == 0.0) break;
            if (it == 0) {
                for (const std::size_t p : interior) pvec[p] = r[p];
            } else {
                const double beta = (rho1 / rho) * (alpha / omega);
                for (const std::size_t p : interior)
                    pvec[p] = r[p] + beta * (pvec[p] - omega * vvec[p]);
            }
            rho = rho1;
            for (const std::size_t p : interior) y[p] = pvec[p] / diag[p];
            apply(y, vvec);
            alpha = rho / dot(r0, vvec);
            for (const std::size_t p : interior) svec[p] = r[p] - alpha * vvec[p];
            resid = std::sqrt(dot(svec, svec)) / bnorm;
            if (resid < params.tolerance) {
                for (const std::size_t p : interior) u[p] += alpha * y[p];
                ++it;
                break;
            }
            for (const std::size_t p : interior) zvec[p] = svec[p] / diag[p];
            apply(zvec, tvec);
            const double tt = dot(tvec, tvec);
            omega = (tt > 0.0) ? dot(tvec, svec) / tt : 0.0;
            for (const std::size_t p : interior) {
                u[p] += alpha * y[p] + omega * zvec[p];
                r[p] = svec[p] - omega * tvec[p];
            }
            resid = std::sqrt(dot(r, r)) / bnorm;
            ++it;
            if (resid < params.tolerance || omega == 0.0) break;
        }
        sol.iterations = it;
        sol.relative_residual = resid;
        if (resid > 100.0 * params.tolerance)
            throw std::runtime_error("fd_oracle: BiCGSTAB stalled at relative residual " +
                                     std::to_string(resid));
    }

    // Dirichlet values on non-unknown nodes (snapped and exterior near-surface
    // nodes inside the horn get their wall potential; useful for inspection)
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const std::size_t p = sol.index(i, j, k);
                if (cls[p] >= 0) continue;
                const double x = x_of(i), yy = x_of(j), z = z_of(k);
                if (k >= nz - 1) u[p] = 0.0;
                else if (z <= surface_z(x, yy) + theta_snap * h)
                    u[p] = boundary_value(x, yy, std::min(z, surface_z(x, yy)));
            }

    // axis table
    {
        std::vector<double> axis(static_cast<std::size_t>(nz), 0.0);
        for (int k = 0; k < nz; ++k) axis[static_cast<std::size_t>(k)] = u[sol.index(nh, nh, k)];
        sol.axis_ = detail::UniformTable(0.0, h, std::move(axis));
    }
    sol.u_ = std::move(u);
    return sol;
}

/// Observed convergence order from three solutions at h, h/2 and h/4:
/// errors are measured against the Richardson extrapolant of the finer pair.
inline double observed_convergence_order(const OracleSolution& coarse, const OracleSolution& medium,
                                         const OracleSolution& fine, Interval z_range_mm,
                                         int n_samples = 9) {
    double e_coarse = 0.0, e_medium = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        const double z = z_range_mm.lo + z_range_mm.width() * s / (n_samples - 1);
        const double extrap = (4.0 * fine.axial_potential(z) - medium.axial_potential(z)) / 3.0;
        e_coarse = std::max(e_coarse, std::abs(coarse.axial_potential(z) - extrap));
        e_medium = std::max(e_medium, std::abs(medium.axial_potential(z) - extrap));
    }
    if (e_medium <= 0.0) return 99.0;
    return std::log2(e_coarse / e_medium);
}

}  // namespace pmtrap
