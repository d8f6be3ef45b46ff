#include <catch2/catch.hpp>

#include "pmtrap/dynamics.hpp"
#include "pmtrap/saddle.hpp"

using namespace pmtrap;

namespace {

const BasisFieldSet& basis() {
    static const BasisFieldSet b = BasisFieldSet::solve(ElectrodeLayout::reference(), MeshParams::coarse());
    return b;
}

const SaddleReport& saddle() {
    static const SaddleReport r = find_rf_null(basis(), RfDrive::operating_point());
    return r;
}

}  // namespace

TEST_CASE("zero fields give straight-line motion") {
    RfDrive off;
    off.v2 = off.v3 = off.v4 = 0.0;
    TrajectoryParams p;
    p.start_mm = {0.0, 0.0, 2.0};
    p.start_velocity_mm_per_us = {0.001, -0.0005, 0.002};
    p.duration_us = 10.0;
    p.sample_stride = 64;
    const auto run = integrate(basis(), off, ElectrodeVoltages::zero(), IonSpecies{}, p);
    REQUIRE_FALSE(run.escaped);
    for (std::size_t i = 0; i < run.t_us.size(); ++i) {
        const double t = run.t_us[i];
        CHECK(run.pos_mm[i].x == Approx(0.0 + 0.001 * t).margin(1e-12));
        CHECK(run.pos_mm[i].y == Approx(0.0 - 0.0005 * t).margin(1e-12));
        CHECK(run.pos_mm[i].z == Approx(2.0 + 0.002 * t).margin(1e-12));
    }
}

TEST_CASE("the time step must resolve the RF cycle") {
    TrajectoryParams p;
    p.dt_ns = 2.0;  // 25 steps per cycle at 20 MHz
    CHECK_THROWS_AS(integrate(basis(), RfDrive::operating_point(), ElectrodeVoltages::zero(),
                              IonSpecies{}, p),
                    std::invalid_argument);
}

TEST_CASE("an ion parked on the null shows no micromotion") {
    TrajectoryParams p;
    p.start_mm = {0.0, 0.0, saddle().z_saddle_mm};
    p.duration_us = 110.0 / 20.0;  // ~110 RF cycles
    p.sample_stride = 1;
    const auto run = integrate(basis(), RfDrive::operating_point(), ElectrodeVoltages::zero(),
                               IonSpecies{}, p);
    REQUIRE_FALSE(run.escaped);
    CHECK(micromotion_amplitude_um(run) < 0.01);  // 10 nm
}

TEST_CASE("micromotion amplitude needs at least 100 cycles") {
    TrajectoryParams p;
    p.start_mm = {0.0, 0.0, saddle().z_saddle_mm};
    p.duration_us = 2.0;
    const auto run = integrate(basis(), RfDrive::operating_point(), ElectrodeVoltages::zero(),
                               IonSpecies{}, p);
    CHECK_THROWS_AS(micromotion_amplitude_um(run), std::invalid_argument);
}

TEST_CASE("micromotion grows linearly with displacement from the null") {
    const double z0 = saddle().z_saddle_mm;
    const IonSpecies ion;
    const auto drive = RfDrive::operating_point();
    const double omega = drive.omega_rad_s();
    double prev = 0.0;
    for (double d_um : {50.0, 100.0, 150.0, 225.0, 300.0}) {
        TrajectoryParams p;
        p.start_mm = {d_um * 1e-3, 0.0, z0};
        p.duration_us = 105.0 / 20.0;
        p.sample_stride = 1;
        const auto run = integrate(basis(), drive, ElectrodeVoltages::zero(), ion, p);
        const double amp = micromotion_amplitude_um(run);
        CHECK(amp > prev);  // monotone growth
        prev = amp;
        if (d_um <= 100.0) {
            // first-order theory: amplitude = Q E_rf(d) / (m Omega^2)
            const Vec3 e = basis().field(drive.voltages(), p.start_mm);
            const double theory_um =
                ion.charge_c() * e.norm() / (ion.mass_kg() * omega * omega) * 1e6;
            CHECK(amp == Approx(theory_um).epsilon(0.10));
        }
    }
}

TEST_CASE("trajectory spectrum reproduces the secular frequency and sidebands") {
    const double z0 = saddle().z_saddle_mm;
    const auto drive = RfDrive::operating_point();
    TrajectoryParams p;
    p.start_mm = {0.1, 0.0, z0};
    p.duration_us = 10.0 / (saddle().f_radial_khz * 1e-3);  // ~10 secular periods
    p.sample_stride = 16;
    const auto run = integrate(basis(), drive, ElectrodeVoltages::zero(), IonSpecies{}, p);
    REQUIRE_FALSE(run.escaped);

    const double f_sec = dominant_frequency_khz(run, Axis::X, 5.0, 100.0);
    CHECK(f_sec == Approx(saddle().f_radial_khz).epsilon(0.05));

    // sidebands at Omega +/- f_sec around the 20 MHz drive
    const double f_lower = dominant_frequency_khz(run, Axis::X, 20000.0 - 100.0, 20000.0 - 5.0);
    CHECK(f_lower == Approx(20000.0 - f_sec).margin(2.0));

    // no other peaks above -40 dB of the secular line
    const auto spec = position_spectrum(run, Axis::X);
    double top = 0.0;
    for (const auto& row : spec) top = std::max(top, row[1]);
    const double df = spec[1][0] - spec[0][0];
    for (std::size_t k = 3; k + 1 < spec.size(); ++k) {
        if (spec[k][1] < 0.01 * top) continue;
        if (spec[k][1] < spec[k - 1][1] || spec[k][1] < spec[k + 1][1]) continue;  // not a peak
        const double f = spec[k][0];
        const bool known = std::abs(f - f_sec) < 4.0 * df + 2.0 ||
                           std::abs(f - (20000.0 - f_sec)) < 4.0 * df + 2.0 ||
                           std::abs(f - (20000.0 + f_sec)) < 4.0 * df + 2.0;
        CAPTURE(f, spec[k][1] / top);
        CHECK(known);
    }
}

TEST_CASE("axial spectrum matches the axial fit") {
    const double z0 = saddle().z_saddle_mm;
    TrajectoryParams p;
    p.start_mm = {0.0, 0.0, z0 + 0.05};
    p.duration_us = 10.0 / (saddle().f_axial_khz * 1e-3);
    p.sample_stride = 16;
    const auto run = integrate(basis(), RfDrive::operating_point(), ElectrodeVoltages::zero(),
                               IonSpecies{}, p);
    const double f_z = dominant_frequency_khz(run, Axis::Z, 10.0, 200.0);
    CHECK(f_z == Approx(saddle().f_axial_khz).epsilon(0.05));
}

TEST_CASE("halving the time step barely moves the extracted frequency") {
    const double z0 = saddle().z_saddle_mm;
    TrajectoryParams p;
    p.start_mm = {0.05, 0.0, z0};
    p.duration_us = 8.0 / (saddle().f_radial_khz * 1e-3);
    p.sample_stride = 16;
    const auto run1 = integrate(basis(), RfDrive::operating_point(), ElectrodeVoltages::zero(),
                                IonSpecies{}, p);
    p.dt_ns = (1e3 / 20.0) / 128.0;
    p.sample_stride = 32;
    const auto run2 = integrate(basis(), RfDrive::operating_point(), ElectrodeVoltages::zero(),
                                IonSpecies{}, p);
    const double f1 = dominant_frequency_khz(run1, Axis::X, 5.0, 100.0);
    const double f2 = dominant_frequency_khz(run2, Axis::X, 5.0, 100.0);
    CHECK(std::abs(f2 - f1) / f1 < 1e-3);
}

TEST_CASE("secular energy is conserved on stable orbits") {
    const double z0 = saddle().z_saddle_mm;
    TrajectoryParams p;
    p.start_mm = {0.05, 0.0, z0};
    p.duration_us = 20.0 / (saddle().f_radial_khz * 1e-3);
    p.sample_stride = 1;
    const auto run = integrate(basis(), RfDrive::operating_point(), ElectrodeVoltages::zero(),
                               IonSpecies{}, p);
    const auto e = secular_energy_ev(run, basis(), RfDrive::operating_point(), IonSpecies{});
    REQUIRE(e.size() > 100);
    double lo = e.front(), hi = e.front();
    for (double v : e) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK((hi - lo) / hi < 0.01);
}

TEST_CASE("escaping ions are flagged") {
    TrajectoryParams p;
    p.start_mm = {0.0, 0.0, 2.1};
    // the axial barrier towards the aperture is ~0.07 eV; 1 mm/us is ~0.9 eV
    p.start_velocity_mm_per_us = {0.0, 0.0, 1.0};
    p.duration_us = 60.0;
    const auto run = integrate(basis(), RfDrive::operating_point(), ElectrodeVoltages::zero(),
                               IonSpecies{}, p);
    CHECK(run.escaped);
}

TEST_CASE("dc displacement verification agrees with the compensation matrix") {
    const auto drive = RfDrive::operating_point();
    const IonSpecies ion;
    // all pairs off: the ion stays put
    const Vec3 rest = verify_dc_displacement_um(basis(), drive, {0, 0, 0}, ion);
    CHECK(rest.norm() < 0.1);

    static const CompensationMatrix m = simulate_compensation_matrix(basis(), drive, ion);
    const Vec3 dx = verify_dc_displacement_um(basis(), drive, {1e-3, 0, 0}, ion);
    CHECK(dx.x == Approx(m.at(0, 0) * 1e-3).epsilon(0.10));
    CHECK(std::abs(dx.y) < 0.15 * std::abs(dx.x));
    CHECK(std::abs(dx.z) < 0.15 * std::abs(dx.x));

    // the advertised test vector moves the ion along (1,2,3)
    const auto u = voltages_for_displacement(CompensationMatrix::published(), {1.0, 2.0, 3.0});
    const Vec3 d = verify_dc_displacement_um(basis(), drive, u, ion);
    const double cosine = d.dot({1.0, 2.0, 3.0}) / (d.norm() * std::sqrt(14.0));
    CHECK(std::acos(std::min(cosine, 1.0)) * 180.0 / constants::pi < 5.0);
}
