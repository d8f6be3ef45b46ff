#pragma once

// Published reference values for this trap design. These are the numbers the
// design study quotes for the as-built geometry; `pmtrap paper-check` and the
// acceptance suite regression-test the workbench against them.

#include <array>

#include "pmtrap/common.hpp"
#include "pmtrap/geometry.hpp"

namespace pmtrap::design {

// Operating point ("table" preset): drive and static pad offsets.
inline constexpr double rf_frequency_mhz = 20.0;
inline constexpr double v1_volt = 0.35;
inline constexpr double v2_volt = 819.20;
inline constexpr double v3_volt = 541.00;
inline constexpr double v4_volt = 712.75;
inline constexpr double v5_volt = 0.50;
inline constexpr double ion_mass_u = 171.0;   // 171Yb+
inline constexpr double ion_charge_e = 1.0;

// Reference point of the linear sensitivity model ("model" preset).
// Identical to the operating point except V4.
inline constexpr double v4_model_volt = 708.00;

// Null position and pseudopotential results at the operating point.
inline constexpr double null_position_mm = 2.100;
inline constexpr double a_radial_ev_mm2 = 0.0348;
inline constexpr double a_axial_ev_mm2 = 0.1391;
inline constexpr double f_radial_khz = 31.6;
inline constexpr double f_axial_khz = 63.1;
inline constexpr Interval radial_fit_window_um{-400.0, 400.0};
inline constexpr Interval axial_fit_window_um{1950.0, 2250.0};

// Null sensitivity to the three RF voltages, um/V.
inline constexpr double k2u_um_per_v = -0.6175;
inline constexpr double k3u_um_per_v = 0.3991;
inline constexpr double k4u_um_per_v = 0.4059;
inline constexpr Interval v2_range_volt{739.2, 899.2};
inline constexpr Interval v3_range_volt{461.0, 621.0};
inline constexpr Interval v4_range_volt{628.0, 788.0};

// Null sensitivity to the eight electrode edges, um/um, with the edge ranges
// over which the linear model was fitted (mm).
struct EdgeSensitivity {
    EdgeId edge;
    double slope_um_per_um;
    Interval range_mm;
};

inline const std::array<EdgeSensitivity, 8>& edge_sensitivities() {
    static const std::array<EdgeSensitivity, 8> table{{
        {{1, true}, 0.9355, {0.216, 0.256}},
        {{2, false}, 1.2364, {0.296, 0.336}},
        {{2, true}, 0.0235, {1.016, 1.096}},
        {{3, false}, 0.0322, {1.136, 1.436}},
        {{3, true}, -0.0071, {1.840, 1.960}},
        {{4, false}, -0.0719, {2.150, 2.450}},
        {{4, true}, 0.1516, {2.700, 3.000}},
        {{5, false}, 0.1066, {3.040, 3.120}},
    }};
    return table;
}

// DC compensation: displacement per pair voltage, um/V, for the x/y/z pair
// patterns, and the advertised test vector.
inline constexpr double dc_slope_x_um_per_v = -1495.0;
inline constexpr double dc_slope_y_um_per_v = -1495.0;
inline constexpr double dc_slope_z_um_per_v = -1052.0;
inline constexpr double dc_test_u1_mv = 0.669;
inline constexpr double dc_test_u2_mv = 1.338;
inline constexpr double dc_test_u3_mv = 2.852;

// Collection optics chain.
inline constexpr double theta_max_deg_quoted = 150.0;
inline constexpr double solid_angle_fraction_quoted = 0.933;
inline constexpr double reflectivity_quoted = 0.90;
inline constexpr double fiber_coupling_quoted = 0.90;
inline constexpr double transmission_quoted = 0.95;
inline constexpr double total_efficiency_quoted = 0.718;
inline constexpr double rayleigh_length_mm_quoted = 21.28;
inline constexpr double gap_beam_diameter_um_quoted = 100.5;
// Quoted rate 10.26 kHz uses a 7.55 gain factor that is inconsistent with the
// chain's own 0.718/0.10 = 7.18; first-principles arithmetic gives ~9.43 kHz.
inline constexpr double rate_quoted_khz = 10.26;

}  // namespace pmtrap::design
