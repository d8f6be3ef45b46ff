#pragma once

// Cubic (Catmull-Rom) interpolation on uniform 1-D tables and 2-D grids.
// Grids support parity ghost nodes across the low edges, matching the
// azimuthal-mode symmetry psi_m(-s) = (-1)^m psi_m(s).

#include <Eigen/Dense>
#include <cmath>
#include <vector>

namespace pmtrap::detail {

struct CubicWeights {
    double w[4];
    double dw[4];  // d/dt of the weights

    static CubicWeights at(double t) {
        CubicWeights c;
        const double t2 = t * t, t3 = t2 * t;
        c.w[0] = 0.5 * (-t3 + 2.0 * t2 - t);
        c.w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
        c.w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
        c.w[3] = 0.5 * (t3 - t2);
        c.dw[0] = 0.5 * (-3.0 * t2 + 4.0 * t - 1.0);
        c.dw[1] = 0.5 * (9.0 * t2 - 10.0 * t);
        c.dw[2] = 0.5 * (-9.0 * t2 + 8.0 * t + 1.0);
        c.dw[3] = 0.5 * (3.0 * t2 - 2.0 * t);
        return c;
    }
};

/// Uniform-grid 1-D table with cubic evaluation; the stencil is shifted at
/// the ends, so evaluation stays defined over the whole [x0, x0+(n-1)*dx].
class UniformTable {
public:
    UniformTable() = default;
    UniformTable(double x0, double dx, std::vector<double> values)
        : x0_(x0), dx_(dx), v_(std::move(values)) {}

    bool empty() const { return v_.size() < 4; }
    double x_min() const { return x0_; }
    double x_max() const { return x0_ + dx_ * (static_cast<double>(v_.size()) - 1.0); }
    double dx() const { return dx_; }
    const std::vector<double>& values() const { return v_; }

    bool covers(double x, double margin = 0.0) const {
        return !empty() && x >= x_min() + margin && x <= x_max() - margin;
    }

    double eval(double x) const {
        double d;
        return eval(x, d, false);
    }

    double eval(double x, double& deriv) const { return eval(x, deriv, true); }

private:
    double eval(double x, double& deriv, bool want_deriv) const {
        const int n = static_cast<int>(v_.size());
        double u = (x - x0_) / dx_;
        int k = static_cast<int>(std::floor(u)) - 1;  // stencil base: nodes k..k+3
        if (k < 0) k = 0;
        if (k > n - 4) k = n - 4;
        const double t = u - (k + 1);
        const auto c = CubicWeights::at(t);
        double s = 0.0, ds = 0.0;
        for (int a = 0; a < 4; ++a) {
            s += c.w[a] * v_[static_cast<std::size_t>(k + a)];
            if (want_deriv) ds += c.dw[a] * v_[static_cast<std::size_t>(k + a)];
        }
        if (want_deriv) deriv = ds / dx_;
        return s;
    }

    double x0_ = 0.0, dx_ = 1.0;
    std::vector<double> v_;
};

/// Bicubic sampler over a mode grid psi(sigma_i, tau_j) = psi(i*hs, j*ht).
/// `parity` is +1/-1 for even/odd reflection across sigma=0 and tau=0.
struct BicubicSample {
    double value;
    double d_sigma;
    double d_tau;
};

inline BicubicSample bicubic(const Eigen::MatrixXd& psi, double hs, double ht, int parity,
                             double sigma, double tau) {
    const int ni = static_cast<int>(psi.rows());
    const int nj = static_cast<int>(psi.cols());

    // parity ghosts below the axes; quadratic-extrapolation ghosts past the
    // Dirichlet edges so the last cell interpolates the boundary values
    auto fetch = [&](int i, int j) -> double {
        double sign = 1.0;
        if (i < 0) { i = -i; sign *= parity; }
        if (j < 0) { j = -j; sign *= parity; }
        if (i <= ni - 1 && j <= nj - 1) return sign * psi(i, j);
        if (i > ni - 1 && j > nj - 1) {
            // corner ghost: extrapolate in j from the i-ghost column
            auto ghost_i = [&](int b) { return 3.0 * psi(ni - 1, b) - 3.0 * psi(ni - 2, b) + psi(ni - 3, b); };
            return sign * (3.0 * ghost_i(nj - 1) - 3.0 * ghost_i(nj - 2) + ghost_i(nj - 3));
        }
        if (i > ni - 1) return sign * (3.0 * psi(ni - 1, j) - 3.0 * psi(ni - 2, j) + psi(ni - 3, j));
        return sign * (3.0 * psi(i, nj - 1) - 3.0 * psi(i, nj - 2) + psi(i, nj - 3));
    };

    double ui = sigma / hs, uj = tau / ht;
    int ki = static_cast<int>(std::floor(ui)) - 1;
    int kj = static_cast<int>(std::floor(uj)) - 1;
    // one ghost node is available on every side
    if (ki < -1) ki = -1;
    if (ki > ni - 3) ki = ni - 3;
    if (kj < -1) kj = -1;
    if (kj > nj - 3) kj = nj - 3;
    const double ti = ui - (ki + 1), tj = uj - (kj + 1);
    const auto ci = CubicWeights::at(ti);
    const auto cj = CubicWeights::at(tj);

    double col[4], dcol[4];
    for (int b = 0; b < 4; ++b) {
        double s = 0.0, ds = 0.0;
        for (int a = 0; a < 4; ++a) {
            const double f = fetch(ki + a, kj + b);
            s += ci.w[a] * f;
            ds += ci.dw[a] * f;
        }
        col[b] = s;
        dcol[b] = ds;
    }
    BicubicSample out{0.0, 0.0, 0.0};
    for (int b = 0; b < 4; ++b) {
        out.value += cj.w[b] * col[b];
        out.d_tau += cj.dw[b] * col[b];
        out.d_sigma += cj.w[b] * dcol[b];
    }
    out.d_sigma /= hs;
    out.d_tau /= ht;
    return out;
}

}  // namespace pmtrap::detail
