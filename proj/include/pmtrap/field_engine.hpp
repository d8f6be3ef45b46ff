#pragma once

// Laplace boundary-value solver for the electrode layout.
//
// Every physical field is a voltage-weighted superposition of unit-voltage
// basis solutions. The axisymmetric bands (2-4) are single m = 0 problems;
// the quadrant pads of segments 1 and 5 are decomposed into azimuthal
// harmonics of their indicator function,
//   1_quadrant(phi) = 1/4 + (1/pi)(a1 cos phi + b1 sin phi + b2 sin 2phi) + ...
// truncated after m = 2, so a DC segment contributes one m = 0, one m = 1 and
// one m = 2 radial problem shared by its four pads. Each radial problem is
// solved on the parabolic-coordinate rectangle (see detail/mode_solver.hpp).
//
// Evaluation: near the axis the fields use the harmonic small-r expansion
// driven by uniform z tables of the on-axis generators; elsewhere bicubic
// interpolation of the mode grids plus the coordinate chain rule.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmtrap/common.hpp"
#include "pmtrap/detail/interp.hpp"
#include "pmtrap/detail/mode_solver.hpp"
#include "pmtrap/detail/parallel.hpp"
#include "pmtrap/detail/profiles.hpp"
#include "pmtrap/electrodes.hpp"
#include "pmtrap/geometry.hpp"

namespace pmtrap {

/// Discretization of the field solve. `step` is the node pitch of the
/// parabolic-coordinate grid (units sqrt(mm)).
struct MeshParams {
    double step = 0.005;
    double cap_extension = 0.0;  // fractional extension of the open-aperture closure

    static MeshParams coarse() { return {0.006, 0.0}; }
    static MeshParams reference() { return {0.005, 0.0}; }
    static MeshParams fine() { return {0.0025, 0.0}; }

    std::uint64_t content_hash() const {
        double v[2] = {step, cap_extension};
        return hash_doubles(v, 2);
    }
};

/// Potential and its gradient at a point. Gradient is d(potential)/d(position)
/// in V/m; the electric field is its negative.
struct FieldSample {
    Vec3 position_mm;
    double potential_v = 0.0;
    Vec3 gradient_v_per_m;
};

namespace detail {

/// Azimuthal harmonic amplitudes of one segment under a voltage assignment.
struct SegmentAmplitudes {
    double a0 = 0.0;   // m = 0
    double a1c = 0.0;  // m = 1, cos
    double a1s = 0.0;  // m = 1, sin
    double a2s = 0.0;  // m = 2, sin
};

inline std::array<SegmentAmplitudes, 5> segment_amplitudes(const ElectrodeVoltages& volts) {
    // quadrant-indicator Fourier coefficients for pads a, b, c, d
    static constexpr double kA1[4] = {1.0, -1.0, -1.0, 1.0};
    static constexpr double kB1[4] = {1.0, 1.0, -1.0, -1.0};
    static constexpr double kB2[4] = {1.0, -1.0, 1.0, -1.0};
    std::array<SegmentAmplitudes, 5> amps{};
    for (int s : {1, 5}) {
        auto& a = amps[static_cast<std::size_t>(s - 1)];
        for (int q = 0; q < 4; ++q) {
            const double vq = volts.pad({s, static_cast<Quadrant>(q)});
            a.a0 += 0.25 * vq;
            a.a1c += kA1[q] / constants::pi * vq;
            a.a1s += kB1[q] / constants::pi * vq;
            a.a2s += kB2[q] / constants::pi * vq;
        }
    }
    for (int s : {2, 3, 4}) amps[static_cast<std::size_t>(s - 1)].a0 = volts.segment(s);
    return amps;
}

}  // namespace detail

/// Per-electrode unit-voltage potential solutions for one layout and mesh.
/// Immutable after solve(); evaluation is pure and reentrant.
class BasisFieldSet {
public:
    /// Solves the nine radial problems. Throws if the layout has structural
    /// violations or the mesh cannot resolve the smallest inter-segment gap.
    static BasisFieldSet solve(const ElectrodeLayout& layout, const MeshParams& mesh = MeshParams::reference()) {
        require_solvable(layout, mesh);
        BasisFieldSet b;
        b.layout_ = layout;
        b.mesh_ = mesh;
        b.dom_ = detail::ParabolicDomain::make(layout.spec.focal_length_mm, layout.spec.depth_mm,
                                               mesh.step, mesh.cap_extension);
        // warm the eigen cache serially, then solve the modes concurrently
        detail::RadialEigenCache::get(detail::RadialOperator::make(0, b.dom_.hs, b.dom_.ns));
        detail::RadialEigenCache::get(detail::RadialOperator::make(1, b.dom_.hs, b.dom_.ns));
        detail::RadialEigenCache::get(detail::RadialOperator::make(2, b.dom_.hs, b.dom_.ns));

        struct Job { int segment; int m; };
        std::vector<Job> jobs;
        for (int s = 1; s <= 5; ++s) jobs.push_back({s, 0});
        for (int s : {1, 5}) {
            jobs.push_back({s, 1});
            jobs.push_back({s, 2});
        }
        detail::parallel_for(static_cast<int>(jobs.size()), [&](int k) {
            const auto [s, m] = jobs[static_cast<std::size_t>(k)];
            Eigen::VectorXd g(b.dom_.nt);
            for (int j = 0; j < b.dom_.nt; ++j)
                g(j) = segment_surface_profile(layout, s, b.dom_.surface_z(b.dom_.tau(j)));
            auto psi = detail::solve_mode(b.dom_, m, g);
            if (m == 0) b.m0_[static_cast<std::size_t>(s - 1)] = std::move(psi);
            else if (m == 1) b.m1_[s == 1 ? 0 : 1] = std::move(psi);
            else b.m2_[s == 1 ? 0 : 1] = std::move(psi);
        });
        b.build_profiles();
        b.compute_diagnostics();
        return b;
    }

    const ElectrodeLayout& layout() const { return layout_; }
    const MeshParams& mesh() const { return mesh_; }

    std::uint64_t content_hash() const {
        return fnv1a("basis", 5, layout_.content_hash() ^ mesh_.content_hash());
    }

    /// True if the point lies strictly inside the solution volume.
    bool inside(const Vec3& p_mm) const {
        return dom_.inside(std::hypot(p_mm.x, p_mm.y), p_mm.z);
    }

    /// z range over which the near-axis profile tables are usable.
    Interval axial_range() const { return {profile_z0_ + kProfileMargin, profile_z1_ - kProfileMargin}; }

    /// Potential of a voltage assignment at a point (V). Linear in voltages.
    double potential(const ElectrodeVoltages& volts, const Vec3& p_mm) const {
        double pot;
        Vec3 grad;
        evaluate(volts, p_mm, pot, &grad, false);
        return pot;
    }

    /// Electric field E = -grad(potential), in V/m.
    Vec3 field(const ElectrodeVoltages& volts, const Vec3& p_mm) const {
        double pot;
        Vec3 grad;
        evaluate(volts, p_mm, pot, &grad, true);
        return grad * -1000.0;  // V/mm -> V/m, E = -grad
    }

    FieldSample sample(const ElectrodeVoltages& volts, const Vec3& p_mm) const {
        double pot;
        Vec3 grad;
        evaluate(volts, p_mm, pot, &grad, true);
        return {p_mm, pot, grad * 1000.0};
    }

    /// On-axis potential (V); table fast path inside axial_range().
    double axial_potential(const ElectrodeVoltages& volts, double z_mm) const {
        const auto amps = detail::segment_amplitudes(volts);
        if (covers_axial(z_mm)) {
            double v = 0.0;
            for (int s = 0; s < 5; ++s)
                if (amps[static_cast<std::size_t>(s)].a0 != 0.0)
                    v += amps[static_cast<std::size_t>(s)].a0 * prof0_[static_cast<std::size_t>(s)].eval(0, z_mm);
            return v;
        }
        return potential(volts, {0.0, 0.0, z_mm});
    }

    /// On-axis axial field E_z (V/m); transverse components vanish for m = 0.
    double axial_field_z(const ElectrodeVoltages& volts, double z_mm) const {
        const auto amps = detail::segment_amplitudes(volts);
        if (covers_axial(z_mm)) {
            double d = 0.0;
            for (int s = 0; s < 5; ++s)
                if (amps[static_cast<std::size_t>(s)].a0 != 0.0)
                    d += amps[static_cast<std::size_t>(s)].a0 * prof0_[static_cast<std::size_t>(s)].eval(1, z_mm);
            return -d * 1000.0;
        }
        return field(volts, {0.0, 0.0, z_mm}).z;
    }

    double solver_residual() const { return solver_residual_; }
    double boundary_fidelity() const { return boundary_fidelity_; }

    // ---- serialization (used by the on-disk basis cache) ----

    void serialize(std::ostream& os) const {
        write_raw(os, kMagic);
        write_raw(os, layout_.content_hash());
        write_raw(os, mesh_.content_hash());
        const auto& l = layout_;
        std::vector<double> head{l.spec.focal_length_mm, l.spec.aperture_diameter_mm, l.spec.depth_mm,
                                 mesh_.step, mesh_.cap_extension};
        for (const auto& s : l.segments) {
            head.push_back(s.z_lower_mm);
            head.push_back(s.z_upper_mm);
        }
        write_raw(os, static_cast<std::uint32_t>(head.size()));
        os.write(reinterpret_cast<const char*>(head.data()),
                 static_cast<std::streamsize>(head.size() * sizeof(double)));
        write_raw(os, static_cast<std::int32_t>(dom_.ns));
        write_raw(os, static_cast<std::int32_t>(dom_.nt));
        for (const auto& g : m0_) write_grid(os, g);
        for (const auto& g : m1_) write_grid(os, g);
        for (const auto& g : m2_) write_grid(os, g);
    }

    static BasisFieldSet deserialize(std::istream& is) {
        std::uint64_t magic = 0;
        read_raw(is, magic);
        if (magic != kMagic) throw std::runtime_error("basis cache: unrecognized format");
        std::uint64_t layout_hash = 0, mesh_hash = 0;
        read_raw(is, layout_hash);
        read_raw(is, mesh_hash);
        std::uint32_t nhead = 0;
        read_raw(is, nhead);
        std::vector<double> head(nhead);
        is.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(nhead * sizeof(double)));
        if (nhead != 15) throw std::runtime_error("basis cache: bad header");
        BasisFieldSet b;
        b.layout_.spec.focal_length_mm = head[0];
        b.layout_.spec.aperture_diameter_mm = head[1];
        b.layout_.spec.depth_mm = head[2];
        b.mesh_.step = head[3];
        b.mesh_.cap_extension = head[4];
        for (int s = 0; s < 5; ++s) {
            b.layout_.segments[static_cast<std::size_t>(s)].id = s + 1;
            b.layout_.segments[static_cast<std::size_t>(s)].z_lower_mm = head[5 + 2 * s];
            b.layout_.segments[static_cast<std::size_t>(s)].z_upper_mm = head[6 + 2 * s];
            b.layout_.segments[static_cast<std::size_t>(s)].kind =
                (s + 1 >= 2 && s + 1 <= 4) ? SegmentKind::RF : SegmentKind::DC;
        }
        if (b.layout_.content_hash() != layout_hash || b.mesh_.content_hash() != mesh_hash)
            throw std::runtime_error("basis cache: header hash mismatch");
        std::int32_t ns = 0, nt = 0;
        read_raw(is, ns);
        read_raw(is, nt);
        b.dom_ = detail::ParabolicDomain::make(b.layout_.spec.focal_length_mm, b.layout_.spec.depth_mm,
                                               b.mesh_.step, b.mesh_.cap_extension);
        if (b.dom_.ns != ns || b.dom_.nt != nt)
            throw std::runtime_error("basis cache: grid dimensions mismatch");
        for (auto& g : b.m0_) read_grid(is, g, ns, nt);
        for (auto& g : b.m1_) read_grid(is, g, ns, nt);
        for (auto& g : b.m2_) read_grid(is, g, ns, nt);
        if (!is) throw std::runtime_error("basis cache: truncated file");
        b.build_profiles();
        b.compute_diagnostics();
        return b;
    }

    const detail::ParabolicDomain& domain() const { return dom_; }

private:
    static constexpr std::uint64_t kMagic = 0x31304642544d50ull;  // "PMTBF01"
    static constexpr double kNearAxisRadius = 0.25;               // mm
    static constexpr double kProfileMargin = 0.04;                // mm
    static constexpr double kExtractR1 = 0.30;                    // mm
    static constexpr double kExtractR2 = 0.42;                    // mm

    static void require_solvable(const ElectrodeLayout& layout, const MeshParams& mesh) {
        const auto violations = validate_layout(layout);
        for (const auto& v : violations)
            if (v.structural())
                throw std::invalid_argument("solve_basis: layout invalid: " + v.message);
        if (mesh.step <= 0.0) throw std::invalid_argument("solve_basis: step must be positive");
        for (int s = 1; s < 5; ++s) {
            const double zlo = layout.segment(s).z_upper_mm;
            const double zhi = layout.segment(s + 1).z_lower_mm;
            const double tau_width = std::sqrt(2.0 * zhi) - std::sqrt(2.0 * zlo);
            if (tau_width < 2.0 * mesh.step)
                throw std::invalid_argument(
                    "solve_basis: step " + std::to_string(mesh.step) + " leaves the " +
                    std::to_string(s) + "-" + std::to_string(s + 1) + " gap (" +
                    std::to_string((zhi - zlo) * 1e3) +
                    " um) under two cells; refine the mesh below " + std::to_string(tau_width / 2.0));
        }
    }

    template <typename T>
    static void write_raw(std::ostream& os, const T& v) {
        os.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    template <typename T>
    static void read_raw(std::istream& is, T& v) {
        is.read(reinterpret_cast<char*>(&v), sizeof v);
    }
    static void write_grid(std::ostream& os, const Eigen::MatrixXd& g) {
        os.write(reinterpret_cast<const char*>(g.data()),
                 static_cast<std::streamsize>(static_cast<std::size_t>(g.size()) * sizeof(double)));
    }
    static void read_grid(std::istream& is, Eigen::MatrixXd& g, int ns, int nt) {
        g.resize(ns + 1, nt + 1);
        is.read(reinterpret_cast<char*>(g.data()),
                static_cast<std::streamsize>(static_cast<std::size_t>(g.size()) * sizeof(double)));
    }

    bool covers_axial(double z) const {
        return z >= profile_z0_ + kProfileMargin && z <= profile_z1_ - kProfileMargin;
    }

    double grid_value_at(const Eigen::MatrixXd& psi, int parity, double r, double z) const {
        double sg, tu;
        dom_.to_parabolic(r, z, sg, tu);
        return detail::bicubic(psi, dom_.hs, dom_.ht, parity, sg, tu).value;
    }

    void build_profiles() {
        const double lowest = dom_.focus_z - 0.5 * dom_.sigma(dom_.ns - 1) * dom_.sigma(dom_.ns - 1);
        profile_z0_ = std::max(0.12, lowest + 0.01);
        profile_z1_ = std::min(dom_.focus_z + 4.4,
                               dom_.focus_z + 0.5 * dom_.tau(dom_.nt - 1) * dom_.tau(dom_.nt - 1));
        const double dz = 0.01;
        const int n = static_cast<int>(std::floor((profile_z1_ - profile_z0_) / dz)) + 1;
        profile_z1_ = profile_z0_ + dz * (n - 1);

        // the z-derivative cascade is only trusted one level per table; the
        // even radial derivatives come from the off-axis solution itself via
        // the harmonic expansion evaluated at two reference radii
        const double r1 = kExtractR1, r2 = kExtractR2;

        for (int s = 0; s < 5; ++s) {
            const auto& psi = m0_[static_cast<std::size_t>(s)];
            auto samples = detail::extract_axis_m0(dom_, psi);
            std::vector<double> c0 = detail::resample_uniform(samples, profile_z0_, dz, n);
            std::vector<double> c1 = detail::derivative_table(c0, dz);
            // phi(r) - c0 = -(r^2/4) c2 + (r^4/64) c4
            const double a11 = -r1 * r1 / 4.0, a12 = r1 * r1 * r1 * r1 / 64.0;
            const double a21 = -r2 * r2 / 4.0, a22 = r2 * r2 * r2 * r2 / 64.0;
            const double det = a11 * a22 - a12 * a21;
            std::vector<double> c2(static_cast<std::size_t>(n)), c4(static_cast<std::size_t>(n));
            for (int t = 0; t < n; ++t) {
                const double z = profile_z0_ + dz * t;
                const double b1 = grid_value_at(psi, 1, r1, z) - c0[static_cast<std::size_t>(t)];
                const double b2 = grid_value_at(psi, 1, r2, z) - c0[static_cast<std::size_t>(t)];
                c2[static_cast<std::size_t>(t)] = (b1 * a22 - a12 * b2) / det;
                c4[static_cast<std::size_t>(t)] = (a11 * b2 - b1 * a21) / det;
            }
            std::vector<double> c3 = detail::derivative_table(c2, dz);
            std::vector<double> c5 = detail::derivative_table(c4, dz);
            prof0_[static_cast<std::size_t>(s)] = detail::ProfileM0::from_tables(
                profile_z0_, dz, {std::move(c0), std::move(c1), std::move(c2), std::move(c3),
                                  std::move(c4), std::move(c5)});
        }
        for (int k = 0; k < 2; ++k) {
            const auto& psi1 = m1_[static_cast<std::size_t>(k)];
            auto s1 = detail::extract_axis_m(dom_, psi1, 1);
            std::vector<double> g0 = detail::resample_uniform(s1, profile_z0_, dz, n);
            std::vector<double> g1 = detail::derivative_table(g0, dz);
            // f1(r)/r - g = -(r^2/8) g'' + (r^4/192) g''''
            const double a11 = -r1 * r1 / 8.0, a12 = r1 * r1 * r1 * r1 / 192.0;
            const double a21 = -r2 * r2 / 8.0, a22 = r2 * r2 * r2 * r2 / 192.0;
            const double det = a11 * a22 - a12 * a21;
            std::vector<double> g2(static_cast<std::size_t>(n));
            for (int t = 0; t < n; ++t) {
                const double z = profile_z0_ + dz * t;
                const double b1 = grid_value_at(psi1, -1, r1, z) / r1 - g0[static_cast<std::size_t>(t)];
                const double b2 = grid_value_at(psi1, -1, r2, z) / r2 - g0[static_cast<std::size_t>(t)];
                g2[static_cast<std::size_t>(t)] = (b1 * a22 - a12 * b2) / det;
            }
            std::vector<double> g3 = detail::derivative_table(g2, dz);
            prof1_[static_cast<std::size_t>(k)] = detail::ProfileM1::from_tables(
                profile_z0_, dz, {std::move(g0), std::move(g1), std::move(g2), std::move(g3)});

            auto s2 = detail::extract_axis_m(dom_, m2_[static_cast<std::size_t>(k)], 2);
            std::vector<double> h0 = detail::resample_uniform(s2, profile_z0_, dz, n);
            std::vector<double> h1 = detail::derivative_table(h0, dz);
            prof2_[static_cast<std::size_t>(k)] =
                detail::ProfileM2::from_tables(profile_z0_, dz, {std::move(h0), std::move(h1)});
        }
    }

    void compute_diagnostics() {
        double res = 0.0;
        for (int s = 0; s < 5; ++s)
            res = std::max(res, detail::mode_residual(dom_, 0, m0_[static_cast<std::size_t>(s)]));
        for (int k = 0; k < 2; ++k) {
            res = std::max(res, detail::mode_residual(dom_, 1, m1_[static_cast<std::size_t>(k)]));
            res = std::max(res, detail::mode_residual(dom_, 2, m2_[static_cast<std::size_t>(k)]));
        }
        solver_residual_ = res;

        // reconstruction fidelity: interpolate each m = 0 basis at off-node
        // surface points away from the edge ramps and compare with its data
        double fid = 0.0;
        for (int s = 1; s <= 5; ++s) {
            const auto& psi = m0_[static_cast<std::size_t>(s - 1)];
            for (int probe_seg = 1; probe_seg <= 5; ++probe_seg) {
                const auto& seg = layout_.segment(probe_seg);
                const double margin = 0.1 * (seg.z_upper_mm - seg.z_lower_mm);
                for (int k = 0; k < 24; ++k) {
                    const double z = seg.z_lower_mm + margin +
                                     (seg.z_upper_mm - seg.z_lower_mm - 2.0 * margin) * (k + 0.37) / 24.0;
                    const double tau_v = std::sqrt(2.0 * z);
                    if (tau_v >= dom_.tau_max) continue;
                    const auto smp = detail::bicubic(psi, dom_.hs, dom_.ht, 1, dom_.sigma0, tau_v);
                    const double expect = (probe_seg == s) ? 1.0 : 0.0;
                    fid = std::max(fid, std::abs(smp.value - expect));
                }
            }
        }
        boundary_fidelity_ = fid;
    }

    // ---- evaluation core ----

    void evaluate(const ElectrodeVoltages& volts, const Vec3& p, double& pot, Vec3* grad,
                  bool want_grad) const {
        const double r = std::hypot(p.x, p.y);
        double sg, tu;
        dom_.to_parabolic(r, p.z, sg, tu);
        if (sg > dom_.sigma0 - 1e-9 || tu > dom_.tau_max - 1e-9)
            throw std::domain_error("field evaluation: point outside the trap volume");
        const auto amps = detail::segment_amplitudes(volts);
        pot = 0.0;
        if (grad) *grad = {};
        if (r <= kNearAxisRadius && covers_axial(p.z)) {
            evaluate_expansion(amps, p, r, pot, grad, want_grad);
        } else {
            evaluate_interp(amps, p, r, sg, tu, pot, grad, want_grad);
        }
    }

    void evaluate_expansion(const std::array<detail::SegmentAmplitudes, 5>& amps, const Vec3& p,
                            double r, double& pot, Vec3* grad, bool want_grad) const {
        const double r2 = r * r, r4 = r2 * r2;
        const double x = p.x, y = p.y, z = p.z;
        for (int s = 0; s < 5; ++s) {
            const auto& a = amps[static_cast<std::size_t>(s)];
            if (a.a0 != 0.0) {
                const auto& c = prof0_[static_cast<std::size_t>(s)];
                const double c0 = c.eval(0, z), c2 = c.eval(2, z), c4 = c.eval(4, z);
                pot += a.a0 * (c0 - 0.25 * r2 * c2 + r4 * c4 / 64.0);
                if (want_grad) {
                    const double c1 = c.eval(1, z), c3 = c.eval(3, z), c5 = c.eval(5, z);
                    const double dr_over_r = -0.5 * c2 + r2 * c4 / 16.0;
                    grad->x += a.a0 * x * dr_over_r;
                    grad->y += a.a0 * y * dr_over_r;
                    grad->z += a.a0 * (c1 - 0.25 * r2 * c3 + r4 * c5 / 64.0);
                }
            }
            if (s != 0 && s != 4) continue;
            const int k = (s == 0) ? 0 : 1;
            if (a.a1c != 0.0 || a.a1s != 0.0) {
                const auto& gt = prof1_[static_cast<std::size_t>(k)];
                const double g = gt.eval(0, z), g2 = gt.eval(2, z);
                const double base = g - r2 * g2 / 8.0;
                pot += (a.a1c * x + a.a1s * y) * base;
                if (want_grad) {
                    const double g1 = gt.eval(1, z), g3 = gt.eval(3, z);
                    const double dz_base = g1 - r2 * g3 / 8.0;
                    grad->x += a.a1c * (g - (3.0 * x * x + y * y) * g2 / 8.0) + a.a1s * (-x * y * g2 / 4.0);
                    grad->y += a.a1c * (-x * y * g2 / 4.0) + a.a1s * (g - (x * x + 3.0 * y * y) * g2 / 8.0);
                    grad->z += (a.a1c * x + a.a1s * y) * dz_base;
                }
            }
            if (a.a2s != 0.0) {
                const auto& gt = prof2_[static_cast<std::size_t>(k)];
                const double g = gt.eval(0, z);
                pot += a.a2s * 2.0 * x * y * g;
                if (want_grad) {
                    const double g1 = gt.eval(1, z);
                    grad->x += a.a2s * 2.0 * y * g;
                    grad->y += a.a2s * 2.0 * x * g;
                    grad->z += a.a2s * 2.0 * x * y * g1;
                }
            }
        }
    }

    void evaluate_interp(const std::array<detail::SegmentAmplitudes, 5>& amps, const Vec3& p,
                         double r, double sg, double tu, double& pot, Vec3* grad,
                         bool want_grad) const {
        const double denom = sg * sg + tu * tu;
        const double phi = std::atan2(p.y, p.x);
        const double cphi = std::cos(phi), sphi = std::sin(phi);

        auto add_mode = [&](const Eigen::MatrixXd& psi, int parity, double trig, double dtrig,
                            double amp) {
            const auto smp = detail::bicubic(psi, dom_.hs, dom_.ht, parity, sg, tu);
            pot += amp * smp.value * trig;
            if (!want_grad) return;
            const double psi_r = (tu * smp.d_sigma + sg * smp.d_tau) / denom;
            const double psi_z = (-sg * smp.d_sigma + tu * smp.d_tau) / denom;
            const double dr = psi_r * trig;
            double dphi_over_r = 0.0;
            if (dtrig != 0.0) dphi_over_r = smp.value * dtrig / std::max(r, 1e-12);
            grad->x += amp * (cphi * dr - sphi * dphi_over_r);
            grad->y += amp * (sphi * dr + cphi * dphi_over_r);
            grad->z += amp * psi_z * trig;
        };

        bool have_m_ge1 = false;
        for (int s : {0, 4}) {
            const auto& a = amps[static_cast<std::size_t>(s)];
            if (a.a1c != 0.0 || a.a1s != 0.0 || a.a2s != 0.0) have_m_ge1 = true;
        }

        for (int s = 0; s < 5; ++s) {
            const auto& a = amps[static_cast<std::size_t>(s)];
            if (a.a0 != 0.0) add_mode(m0_[static_cast<std::size_t>(s)], 1, 1.0, 0.0, a.a0);
        }
        if (have_m_ge1 && r < 1e-6) {
            // azimuthal factors are singular on the axis; finite-difference the
            // m >= 1 part in x and y instead (rarely reached: outside the
            // profile range with pad drive)
            const double d = 1e-4;
            auto pot_m = [&](double px, double py) {
                double acc = 0.0;
                const double rr = std::hypot(px, py);
                double sg2, tu2;
                dom_.to_parabolic(rr, p.z, sg2, tu2);
                const double ph = std::atan2(py, px);
                for (int s : {0, 4}) {
                    const auto& a = amps[static_cast<std::size_t>(s)];
                    const int k = (s == 0) ? 0 : 1;
                    if (a.a1c != 0.0 || a.a1s != 0.0) {
                        const auto smp = detail::bicubic(m1_[static_cast<std::size_t>(k)], dom_.hs,
                                                         dom_.ht, -1, sg2, tu2);
                        acc += (a.a1c * std::cos(ph) + a.a1s * std::sin(ph)) * smp.value;
                    }
                    if (a.a2s != 0.0) {
                        const auto smp = detail::bicubic(m2_[static_cast<std::size_t>(k)], dom_.hs,
                                                         dom_.ht, 1, sg2, tu2);
                        acc += a.a2s * std::sin(2.0 * ph) * smp.value;
                    }
                }
                return acc;
            };
            pot += pot_m(p.x, p.y);
            if (want_grad) {
                grad->x += (pot_m(p.x + d, p.y) - pot_m(p.x - d, p.y)) / (2.0 * d);
                grad->y += (pot_m(p.x, p.y + d) - pot_m(p.x, p.y - d)) / (2.0 * d);
                grad->z += 0.0;  // m >= 1 axial gradients vanish on the axis
            }
            return;
        }
        for (int s : {0, 4}) {
            const auto& a = amps[static_cast<std::size_t>(s)];
            const int k = (s == 0) ? 0 : 1;
            if (a.a1c != 0.0)
                add_mode(m1_[static_cast<std::size_t>(k)], -1, cphi, -sphi, a.a1c);
            if (a.a1s != 0.0)
                add_mode(m1_[static_cast<std::size_t>(k)], -1, sphi, cphi, a.a1s);
            if (a.a2s != 0.0)
                add_mode(m2_[static_cast<std::size_t>(k)], 1, std::sin(2.0 * phi),
                         2.0 * std::cos(2.0 * phi), a.a2s);
        }
    }

    ElectrodeLayout layout_;
    MeshParams mesh_;
    detail::ParabolicDomain dom_;
    std::array<Eigen::MatrixXd, 5> m0_;
    std::array<Eigen::MatrixXd, 2> m1_;  // segments 1 and 5
    std::array<Eigen::MatrixXd, 2> m2_;
    std::array<detail::ProfileM0, 5> prof0_;
    std::array<detail::ProfileM1, 2> prof1_;
    std::array<detail::ProfileM2, 2> prof2_;
    double profile_z0_ = 0.0, profile_z1_ = 0.0;
    double solver_residual_ = 0.0;
    double boundary_fidelity_ = 0.0;
};

}  // namespace pmtrap
