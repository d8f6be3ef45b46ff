#include <catch2/catch.hpp>

#include "pmtrap/pseudopotential.hpp"
#include "pmtrap/saddle.hpp"

using namespace pmtrap;

namespace {
const BasisFieldSet& basis() {
    static const BasisFieldSet b = BasisFieldSet::solve(ElectrodeLayout::reference(), MeshParams::coarse());
    return b;
}
}  // namespace

TEST_CASE("pseudopotential vanishes at the null and scales quadratically") {
    const auto drive = RfDrive::operating_point();
    const IonSpecies ion;
    const double z0 = detail::locate_axial_null(basis(), drive.voltages());
    CHECK(pseudo_at(basis(), drive, ion, {0.0, 0.0, z0}) < 1e-6);

    const Vec3 p{0.15, -0.05, 2.2};
    RfDrive doubled = drive;
    doubled.v2 *= 2.0;
    doubled.v3 *= 2.0;
    doubled.v4 *= 2.0;
    CHECK(pseudo_at(basis(), doubled, ion, p) ==
          Approx(4.0 * pseudo_at(basis(), drive, ion, p)).epsilon(1e-10));

    RfDrive flipped = drive;
    flipped.v2 = -drive.v2;
    flipped.v3 = -drive.v3;
    flipped.v4 = -drive.v4;
    CHECK(pseudo_at(basis(), flipped, ion, p) ==
          Approx(pseudo_at(basis(), drive, ion, p)).epsilon(1e-12));

    CHECK(pseudo_at(basis(), drive, ion, p) >= 0.0);
}

TEST_CASE("radial well curvature and frequency match the published values") {
    const auto drive = RfDrive::operating_point();
    const IonSpecies ion;
    const auto fit = fit_secular(basis(), drive, ion, Axis::X, design::radial_fit_window_um);
    REQUIRE(fit.fit.trapped);
    CHECK(fit.fit.clean);
    CHECK(fit.fit.a_ev_mm2 == Approx(design::a_radial_ev_mm2).epsilon(0.15));
    REQUIRE(fit.frequency_khz.has_value());
    CHECK(*fit.frequency_khz == Approx(design::f_radial_khz).epsilon(0.15));
}

TEST_CASE("axial well curvature and frequency match the published values") {
    const auto drive = RfDrive::operating_point();
    const IonSpecies ion;
    const double z0 = detail::locate_axial_null(basis(), drive.voltages());
    const Interval window{z0 * 1e3 - 150.0, z0 * 1e3 + 150.0};
    const auto fit = fit_secular(basis(), drive, ion, Axis::Z, window, z0);
    REQUIRE(fit.fit.trapped);
    CHECK(fit.fit.a_ev_mm2 == Approx(design::a_axial_ev_mm2).epsilon(0.15));
    CHECK(*fit.frequency_khz == Approx(design::f_axial_khz).epsilon(0.15));
    // fitted minimum coincides with the null
    CHECK(fit.fit.vertex_mm == Approx(z0).margin(0.01));
}

TEST_CASE("frequency ratio follows the curvature ratio exactly") {
    const auto drive = RfDrive::operating_point();
    const IonSpecies ion;
    const double z0 = detail::locate_axial_null(basis(), drive.voltages());
    const auto fr = fit_secular(basis(), drive, ion, Axis::X, design::radial_fit_window_um, z0);
    const Interval wz{z0 * 1e3 - 150.0, z0 * 1e3 + 150.0};
    const auto fz = fit_secular(basis(), drive, ion, Axis::Z, wz, z0);
    const double ratio_f = *fz.frequency_khz / *fr.frequency_khz;
    const double ratio_a = std::sqrt(fz.fit.a_ev_mm2 / fr.fit.a_ev_mm2);
    CHECK(ratio_f == Approx(ratio_a).epsilon(1e-12));
    // the axial quadrupole geometry makes the ratio 2
    CHECK(ratio_f == Approx(2.0).margin(0.05));
    // x and y fits agree by symmetry
    const auto fy = fit_secular(basis(), drive, ion, Axis::Y, design::radial_fit_window_um, z0);
    CHECK(fy.fit.a_ev_mm2 == Approx(fr.fit.a_ev_mm2).epsilon(1e-6));
}

TEST_CASE("doubling the drive doubles the fitted frequency") {
    const auto drive = RfDrive::operating_point();
    const IonSpecies ion;
    RfDrive doubled = drive;
    doubled.v2 *= 2.0;
    doubled.v3 *= 2.0;
    doubled.v4 *= 2.0;
    const double z0 = detail::locate_axial_null(basis(), drive.voltages());
    const auto f1 = fit_secular(basis(), drive, ion, Axis::X, design::radial_fit_window_um, z0);
    const auto f2 = fit_secular(basis(), doubled, ion, Axis::X, design::radial_fit_window_um, z0);
    CHECK(f2.fit.a_ev_mm2 == Approx(4.0 * f1.fit.a_ev_mm2).epsilon(1e-9));
    CHECK(*f2.frequency_khz == Approx(2.0 * *f1.frequency_khz).epsilon(1e-9));
}

TEST_CASE("unit bookkeeping reproduces the quoted frequencies") {
    // 0.0348 eV/mm^2 with a 171 u ion must give ~31.5 kHz
    const IonSpecies ion;
    CHECK(secular_frequency_khz(design::a_radial_ev_mm2, ion) == Approx(31.54).margin(0.05));
    CHECK(secular_frequency_khz(design::a_axial_ev_mm2, ion) == Approx(63.06).margin(0.1));
}

TEST_CASE("charge and mass scaling of the well") {
    const auto drive = RfDrive::operating_point();
    const IonSpecies ion;
    IonSpecies doubly = ion;
    doubly.charge_e = 2.0;
    const Vec3 p{0.1, 0.0, 2.15};
    // pseudopotential energy scales with Q^2, frequency with Q
    CHECK(pseudo_at(basis(), drive, doubly, p) ==
          Approx(4.0 * pseudo_at(basis(), drive, ion, p)).epsilon(1e-12));
    const double z0 = detail::locate_axial_null(basis(), drive.voltages());
    const auto f1 = fit_secular(basis(), drive, ion, Axis::X, design::radial_fit_window_um, z0);
    const auto f2 = fit_secular(basis(), drive, doubly, Axis::X, design::radial_fit_window_um, z0);
    CHECK(*f2.frequency_khz == Approx(2.0 * *f1.frequency_khz).epsilon(1e-9));
    // heavier ion, softer motion: f ~ 1/m
    IonSpecies heavy = ion;
    heavy.mass_u = 4.0 * ion.mass_u;
    const auto f3 = fit_secular(basis(), drive, heavy, Axis::X, design::radial_fit_window_um, z0);
    CHECK(*f3.frequency_khz == Approx(0.25 * *f1.frequency_khz).epsilon(1e-9));
}

TEST_CASE("fit guards") {
    const auto drive = RfDrive::operating_point();
    const IonSpecies ion;
    CHECK_THROWS_AS(fit_secular(basis(), drive, ion, Axis::X, Interval{-30000.0, 30000.0}),
                    std::domain_error);
    CHECK_THROWS_AS(fit_secular(basis(), drive, ion, Axis::Z, Interval{1950.0, 2250.0}, 2.5),
                    std::invalid_argument);  // window not centred on the given null
}

TEST_CASE("a window holding a pseudopotential maximum reports untrapped") {
    const auto drive = RfDrive::operating_point();
    const IonSpecies ion;
    // |E_z| peaks somewhere above the null; the axial well there is inverted
    double z_peak = 0.0, best = -1.0;
    for (double z = 2.3; z <= 2.9; z += 0.005) {
        const double e = std::abs(basis().axial_field_z(drive.voltages(), z));
        if (e > best) {
            best = e;
            z_peak = z;
        }
    }
    const Interval window{z_peak * 1e3 - 100.0, z_peak * 1e3 + 100.0};
    const auto fit = fit_secular(basis(), drive, ion, Axis::Z, window, z_peak);
    CHECK_FALSE(fit.fit.trapped);
    CHECK_FALSE(fit.frequency_khz.has_value());
    CHECK(fit.fit.a_ev_mm2 < 0.0);
}

TEST_CASE("closed-form depth estimate") {
    const IonSpecies ion;
    CHECK(closed_form_depth_ev(ion, 0.0, 4.0, 20.0) == 0.0);
    const double d1 = closed_form_depth_ev(ion, 800.0, 1.0, 20.0);
    const double d4 = closed_form_depth_ev(ion, 800.0, 4.0, 20.0);
    CHECK(d1 == Approx(16.0 * d4).epsilon(1e-12));
    CHECK(d4 > 0.0);
    CHECK_THROWS_AS(closed_form_depth_ev(ion, 800.0, -1.0, 20.0), std::domain_error);

    // r0 from the layout: focus to the near edge of its gap, exactly 4 mm
    CHECK(focus_gap_rf_distance_mm(ElectrodeLayout::reference()) == Approx(4.0).epsilon(1e-12));
}
