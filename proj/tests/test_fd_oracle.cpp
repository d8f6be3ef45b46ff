#include <catch2/catch.hpp>

#include "pmtrap/fd_oracle.hpp"
#include "pmtrap/field_engine.hpp"
#include "pmtrap/pseudopotential.hpp"

using namespace pmtrap;

namespace {

ElectrodeVoltages table_voltages() {
    ElectrodeVoltages v = ElectrodeVoltages::rf(819.20, 541.00, 712.75);
    for (int q = 0; q < 4; ++q) {
        v.pad({1, static_cast<Quadrant>(q)}) = 0.35;
        v.pad({5, static_cast<Quadrant>(q)}) = 0.50;
    }
    return v;
}

}  // namespace

TEST_CASE("oracle refuses grids over the memory budget") {
    OracleParams p;
    p.spacing_mm = 0.02;
    p.memory_budget_mb = 256.0;
    CHECK_THROWS_WITH(fd_oracle_solve(ElectrodeLayout::reference(), table_voltages(), p),
                      Catch::Contains("budget"));
}

TEST_CASE("boundary values follow the assignment") {
    const auto layout = ElectrodeLayout::reference();
    ElectrodeVoltages v;
    v.segment(3) = 1.0;
    // surface potential: 1 on the band, ramps in its gaps, 0 on the others
    CHECK(surface_potential(layout, v, 1.5, 0.3) == 1.0);
    CHECK(surface_potential(layout, v, 0.1, 0.3) == 0.0);
    CHECK(surface_potential(layout, v, 2.1, 0.3) == Approx(0.5));
    CHECK(surface_potential(layout, v, 1.116, 0.3) == Approx(0.5));  // mid 2-3 gap
    CHECK(surface_potential(layout, v, 5.0, 0.3) == 0.0);

    // pad assignments depend on the azimuth
    ElectrodeVoltages pads;
    pads.pad({1, Quadrant::A}) = 2.0;
    CHECK(surface_potential(layout, pads, 0.1, deg_to_rad(45.0)) == 2.0);
    CHECK(surface_potential(layout, pads, 0.1, deg_to_rad(135.0)) == 0.0);

    // the ramp across the 1-2 gap follows the local pad voltage
    pads.segment(2) = 1.0;
    const double mid_gap = 0.5 * (0.256 + 0.296);
    CHECK(surface_potential(layout, pads, mid_gap, deg_to_rad(45.0)) == Approx(1.5));
    CHECK(surface_potential(layout, pads, mid_gap, deg_to_rad(135.0)) == Approx(0.5));

    // beyond the top band everything is segment 5
    ElectrodeVoltages top;
    top.pad({5, Quadrant::B}) = 3.0;
    CHECK(surface_potential(layout, top, 12.0, deg_to_rad(135.0)) == 3.0);
}

TEST_CASE("uniform one volt fills the horn") {
    // the oracle's grounded lid sits at z_top, so a few-percent deficit leaks
    // down the horn; the primary solver's closure is 30 mm away instead
    OracleParams p;
    p.spacing_mm = 0.4;
    p.z_top_mm = 10.0;
    const auto sol = fd_oracle_solve(ElectrodeLayout::reference(), ElectrodeVoltages::uniform(1.0), p);
    for (double z : {0.8, 1.6, 2.4})
        CHECK(sol.axial_potential(z) == Approx(1.0).margin(0.09));
}

TEST_CASE("axis potential agrees with the primary solver within 1%") {
    const auto layout = ElectrodeLayout::reference();
    const auto volts = table_voltages();
    OracleParams p;
    p.spacing_mm = 0.2;
    const auto oracle = fd_oracle_solve(layout, volts, p);
    static const BasisFieldSet primary = BasisFieldSet::solve(layout, MeshParams::coarse());
    for (double z = 1.0; z <= 3.01; z += 0.2) {
        const double a = primary.axial_potential(volts, z);
        const double b = oracle.axial_potential(z);
        CHECK(b == Approx(a).epsilon(0.01));
    }
}

TEST_CASE("pad fields agree with the azimuthal decomposition on the axis") {
    // pads make the boundary azimuth-dependent; the oracle solves them in
    // full 3-D while the primary carries azimuthal modes m <= 2. On the axis
    // the transverse field comes from m = 1 alone (higher modes vanish as
    // r^m), so the two must agree there.
    const auto layout = ElectrodeLayout::reference();
    ElectrodeVoltages volts;  // the x pair pattern at 1 V
    for (int seg : {1, 5}) {
        volts.pad({seg, Quadrant::A}) = 1.0;
        volts.pad({seg, Quadrant::D}) = 1.0;
        volts.pad({seg, Quadrant::B}) = -1.0;
        volts.pad({seg, Quadrant::C}) = -1.0;
    }
    OracleParams p;
    p.spacing_mm = 0.15;
    const auto oracle = fd_oracle_solve(layout, volts, p);
    static const BasisFieldSet primary = BasisFieldSet::solve(layout, MeshParams::coarse());

    const int nh = (oracle.nx - 1) / 2;
    const double h = oracle.spacing_mm;
    for (double z : {1.8, 2.1, 2.4}) {
        const int k = static_cast<int>(std::round(z / h));
        const double ex_oracle =
            -(oracle.node_potential(nh + 1, nh, k) - oracle.node_potential(nh - 1, nh, k)) /
            (2.0 * h * 1e-3);  // V/m
        const double ex_primary = primary.field(volts, {0.0, 0.0, k * h}).x;
        CAPTURE(z, ex_oracle, ex_primary);
        CHECK(ex_oracle == Approx(ex_primary).epsilon(0.05));
        // the axis potential of the odd pattern is zero up to the crossing
        // samples that land exactly on the x = 0 seam, where the quadrant
        // tie-break assigns a full pad value instead of the midpoint
        CHECK(std::abs(oracle.node_potential(nh, nh, k)) < 2e-3);
    }
}

TEST_CASE("the oracle finds the null near the primary solver's position") {
    const auto layout = ElectrodeLayout::reference();
    const auto volts = table_voltages();
    OracleParams p;
    p.spacing_mm = 0.2;
    const auto sol = fd_oracle_solve(layout, volts, p);
    auto ez = [&](double z) {
        double d;
        (void)sol.axis_table().eval(z, d);
        return -d;
    };
    double lo = 1.9, hi = 2.3, flo = ez(lo);
    REQUIRE(flo * ez(hi) < 0.0);
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi), fm = ez(mid);
        if (flo * fm <= 0.0) hi = mid;
        else {
            lo = mid;
            flo = fm;
        }
    }
    const double z_oracle = 0.5 * (lo + hi);
    static const BasisFieldSet primary = BasisFieldSet::solve(layout, MeshParams::coarse());
    const double z_primary = detail::locate_axial_null(primary, volts);
    // the oracle converges to the primary's null from above as h -> 0;
    // at h = 0.2 the residual offset is a few tens of microns
    CHECK(std::abs(z_oracle - z_primary) * 1e3 < 40.0);
}

TEST_CASE("grid refinement converges at second order on the axis") {
    const auto layout = ElectrodeLayout::reference();
    const auto volts = table_voltages();
    OracleParams p;
    p.z_top_mm = 10.0;
    p.spacing_mm = 0.8;
    const auto coarse = fd_oracle_solve(layout, volts, p);
    p.spacing_mm = 0.4;
    const auto medium = fd_oracle_solve(layout, volts, p);
    p.spacing_mm = 0.2;
    const auto fine = fd_oracle_solve(layout, volts, p);
    const double order = observed_convergence_order(coarse, medium, fine, {1.0, 3.0});
    CAPTURE(order);
    CHECK(order >= 1.5);
}
