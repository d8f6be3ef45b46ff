#pragma once

// Direct solver for the azimuthal-mode Laplace problems on the parabolic
// coordinate rectangle.
//
// With sigma^2 = R - (z-f), tau^2 = R + (z-f), R = sqrt(r^2 + (z-f)^2), the
// mirror z = r^2/4f is the coordinate line sigma = sigma0 = sqrt(2f), and the
// m-th azimuthal mode of Laplace's equation separates into
//
//   [psi_ss + psi_s/s - m^2 psi/s^2] + [psi_tt + psi_t/t - m^2 psi/t^2] = 0
//
// on [0, sigma0] x [0, tau_max]. Finite volumes give a Kronecker-sum system
// A_sigma (x) I + I (x) A_tau; diagonalizing A_sigma (weighted-symmetric
// tridiagonal) reduces each solve to independent tridiagonal solves in tau.
// Boundary data: Dirichlet surface profile at sigma0, grounded cap at
// tau_max, parity regularity on the two axis edges.

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "pmtrap/common.hpp"

namespace pmtrap::detail {

/// Geometry of the solve rectangle. Lengths in mm, coordinates in sqrt(mm).
struct ParabolicDomain {
    double focus_z = 0.0;    // z of the focus = focal length
    double sigma0 = 0.0;
    double tau_max = 0.0;
    double hs = 0.0, ht = 0.0;
    int ns = 0, nt = 0;      // node counts: i in [0, ns], j in [0, nt]

    static ParabolicDomain make(double focal_length_mm, double depth_mm, double step,
                                double cap_extension) {
        ParabolicDomain d;
        d.focus_z = focal_length_mm;
        d.sigma0 = std::sqrt(2.0 * focal_length_mm);
        d.tau_max = std::sqrt(2.0 * depth_mm * (1.0 + cap_extension));
        d.ns = std::max(8, static_cast<int>(std::ceil(d.sigma0 / step)));
        d.nt = std::max(8, static_cast<int>(std::ceil(d.tau_max / step)));
        d.hs = d.sigma0 / d.ns;
        d.ht = d.tau_max / d.nt;
        return d;
    }

    double sigma(int i) const { return hs * i; }
    double tau(int j) const { return ht * j; }
    /// Surface height of the tau coordinate: z = tau^2/2 on sigma = sigma0.
    double surface_z(double tau_v) const { return 0.5 * tau_v * tau_v; }

    /// Map a cylindrical point to parabolic coordinates.
    void to_parabolic(double r, double z, double& sigma_v, double& tau_v) const {
        const double zp = z - focus_z;
        const double rr = std::sqrt(r * r + zp * zp);
        sigma_v = std::sqrt(std::max(rr - zp, 0.0));
        tau_v = std::sqrt(std::max(rr + zp, 0.0));
    }

    bool inside(double r, double z, double margin = 1e-9) const {
        double s, t;
        to_parabolic(r, z, s, t);
        return s <= sigma0 - margin && t <= tau_max - margin;
    }
};

/// Tridiagonal radial operator psi'' + psi'/x - m^2 psi/x^2 on x_i = i*h with
/// unknowns i in [i_min, n-1]; node n is the Dirichlet boundary.
struct RadialOperator {
    int m = 0;
    double h = 0.0;
    int i_min = 0;   // 0 for m = 0 (regularity row), 1 otherwise
    int n = 0;       // Dirichlet node index
    std::vector<double> lower, diag, upper;  // indexed by node i
    double bc_coef = 0.0;                    // coupling of row n-1 to node n

    static RadialOperator make(int m, double h, int n) {
        RadialOperator op;
        op.m = m;
        op.h = h;
        op.n = n;
        op.i_min = (m == 0) ? 0 : 1;
        op.lower.assign(static_cast<std::size_t>(n), 0.0);
        op.diag.assign(static_cast<std::size_t>(n), 0.0);
        op.upper.assign(static_cast<std::size_t>(n), 0.0);
        for (int i = op.i_min; i < n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            if (i == 0) {
                op.diag[k] = -4.0 / (h * h);
                op.upper[k] = 4.0 / (h * h);
            } else {
                const double x = h * i;
                op.lower[k] = (x - 0.5 * h) / (x * h * h);
                op.upper[k] = (x + 0.5 * h) / (x * h * h);
                op.diag[k] = -(op.lower[k] + op.upper[k]) - static_cast<double>(m) * m / (x * x);
            }
        }
        op.bc_coef = op.upper[static_cast<std::size_t>(n - 1)];
        return op;
    }

    /// Finite-volume weight making W*A symmetric.
    double weight(int i) const { return (i == 0) ? h * h / 8.0 : h * static_cast<double>(i) * h; }
};

/// Eigendecomposition of a RadialOperator: A = V diag(lam) V^{-1}.
struct RadialEigen {
    Eigen::VectorXd lam;
    Eigen::MatrixXd v;      // columns scaled so v * phi recovers psi
    Eigen::MatrixXd v_inv;
    int i_min = 0;

    static RadialEigen make(const RadialOperator& op) {
        const int nu = op.n - op.i_min;
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(nu, nu);
        for (int a = 0; a < nu; ++a) {
            const int i = op.i_min + a;
            t(a, a) = op.diag[static_cast<std::size_t>(i)];
            if (a + 1 < nu) {
                const double s = op.weight(i) * op.upper[static_cast<std::size_t>(i)];
                t(a, a + 1) = t(a + 1, a) = s / std::sqrt(op.weight(i) * op.weight(i + 1));
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("mode_solver: eigendecomposition failed");
        RadialEigen re;
        re.i_min = op.i_min;
        re.lam = es.eigenvalues();
        re.v = es.eigenvectors();
        re.v_inv = es.eigenvectors().transpose();
        for (int a = 0; a < nu; ++a) {
            const double w = std::sqrt(op.weight(op.i_min + a));
            re.v.row(a) /= w;
            re.v_inv.col(a) *= w;
        }
        return re;
    }
};

/// Process-wide cache of radial eigendecompositions keyed by (m, h, n).
class RadialEigenCache {
public:
    static const RadialEigen& get(const RadialOperator& op) {
        static RadialEigenCache cache;
        const std::uint64_t key = key_of(op);
        std::lock_guard<std::mutex> lock(cache.mu_);
        auto it = cache.map_.find(key);
        if (it == cache.map_.end())
            it = cache.map_.emplace(key, std::make_unique<RadialEigen>(RadialEigen::make(op))).first;
        return *it->second;
    }

private:
    static std::uint64_t key_of(const RadialOperator& op) {
        double v[2] = {op.h, static_cast<double>(op.n)};
        return hash_doubles(v, 2, 1099511628211ull * static_cast<std::uint64_t>(op.m + 1));
    }
    std::mutex mu_;
    std::unordered_map<std::uint64_t, std::unique_ptr<RadialEigen>> map_;
};

/// Solves (A_sigma + A_tau) psi = 0 with psi(sigma0, tau_j) = g_j, returning
/// the full node grid (ns+1) x (nt+1) including boundary values.
inline Eigen::MatrixXd solve_mode(const ParabolicDomain& dom, int m,
                                  const Eigen::VectorXd& g_surface) {
    const auto op_s = RadialOperator::make(m, dom.hs, dom.ns);
    const auto op_t = RadialOperator::make(m, dom.ht, dom.nt);
    const auto& eig = RadialEigenCache::get(op_s);

    const int nus = dom.ns - op_s.i_min;   // sigma unknowns
    const int nut = dom.nt - op_t.i_min;   // tau unknowns
    const int last = nus - 1;              // row coupled to the surface data

    // rhs B has a single nonzero sigma-row; C = V^{-1} B is a rank-1 outer product
    Eigen::MatrixXd phi(nus, nut);
    {
        Eigen::VectorXd rhs_row(nut);
        for (int b = 0; b < nut; ++b)
            rhs_row(b) = -op_s.bc_coef * g_surface(op_t.i_min + b);

        std::vector<double> dl(static_cast<std::size_t>(nut)), dd(static_cast<std::size_t>(nut)),
            du(static_cast<std::size_t>(nut)), rr(static_cast<std::size_t>(nut));
        for (int k = 0; k < nus; ++k) {
            const double vk = eig.v_inv(k, last);
            const double lam = eig.lam(k);
            for (int b = 0; b < nut; ++b) {
                const int j = op_t.i_min + b;
                const auto jb = static_cast<std::size_t>(b);
                dl[jb] = op_t.lower[static_cast<std::size_t>(j)];
                dd[jb] = op_t.diag[static_cast<std::size_t>(j)] + lam;
                du[jb] = op_t.upper[static_cast<std::size_t>(j)];
                rr[jb] = vk * rhs_row(b);
            }
            for (int b = 1; b < nut; ++b) {
                const auto jb = static_cast<std::size_t>(b);
                const double f = dl[jb] / dd[jb - 1];
                dd[jb] -= f * du[jb - 1];
                rr[jb] -= f * rr[jb - 1];
            }
            rr[static_cast<std::size_t>(nut - 1)] /= dd[static_cast<std::size_t>(nut - 1)];
            for (int b = nut - 2; b >= 0; --b) {
                const auto jb = static_cast<std::size_t>(b);
                rr[jb] = (rr[jb] - du[jb] * rr[jb + 1]) / dd[jb];
            }
            for (int b = 0; b < nut; ++b) phi(k, b) = rr[static_cast<std::size_t>(b)];
        }
    }

    Eigen::MatrixXd interior = eig.v * phi;  // nus x nut

    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(dom.ns + 1, dom.nt + 1);
    for (int a = 0; a < nus; ++a)
        for (int b = 0; b < nut; ++b)
            psi(op_s.i_min + a, op_t.i_min + b) = interior(a, b);
    // surface row carries the Dirichlet profile; the cap column (j = nt) and,
    // for m >= 1, the two axis edges stay zero
    for (int j = op_t.i_min; j < dom.nt; ++j) psi(dom.ns, j) = g_surface(j);
    return psi;
}

/// Max-abs residual of the discrete equations over the unknown block.
inline double mode_residual(const ParabolicDomain& dom, int m, const Eigen::MatrixXd& psi) {
    const auto op_s = RadialOperator::make(m, dom.hs, dom.ns);
    const auto op_t = RadialOperator::make(m, dom.ht, dom.nt);
    double worst = 0.0;
    for (int i = op_s.i_min; i < dom.ns; ++i) {
        const auto is = static_cast<std::size_t>(i);
        for (int j = op_t.i_min; j < dom.nt; ++j) {
            const auto js = static_cast<std::size_t>(j);
            double r = (op_s.diag[is] + op_t.diag[js]) * psi(i, j) + op_s.upper[is] * psi(i + 1, j) +
                       op_t.upper[js] * psi(i, j + 1);
            if (i > 0) r += op_s.lower[is] * psi(i - 1, j);
            if (j > 0) r += op_t.lower[js] * psi(i, j - 1);
            worst = std::max(worst, std::abs(r) * dom.hs * dom.hs);  // scale ~ h^2 * L psi
        }
    }
    return worst;
}

}  // namespace pmtrap::detail
