#pragma once

// Photon-collection optics of the mirror: reflection geometry, collected
// solid angle, laser clearance through the electrode gap, and the efficiency
// and entanglement-rate chain. Angles are degrees at this interface.

#include <cmath>
#include <stdexcept>

#include "pmtrap/common.hpp"
#include "pmtrap/geometry.hpp"

namespace pmtrap {

/// A ray hitting the surface where the tangent makes angle alpha with the
/// x-y plane leaves deflected by theta = 2*alpha.
inline double deflection_angle_deg(double alpha_deg) {
    if (alpha_deg < 0.0 || alpha_deg >= 90.0)
        throw std::domain_error("deflection_angle: alpha must be in [0, 90) deg");
    return 2.0 * alpha_deg;
}

/// Largest deflection angle collected by the mirror, set by the rim:
/// tan(alpha_rim) = dz/dr at r_rim = r_rim / 2f, theta_max = 2*alpha_rim.
inline double theta_max_deg(const ParaboloidSpec& spec) {
    const double slope = spec.aperture_radius_mm() / (2.0 * spec.focal_length_mm);
    return rad_to_deg(2.0 * std::atan(slope));
}

/// Fraction of the full emission sphere within deflection angle theta_max.
inline double solid_angle_fraction(double theta_max_deg) {
    if (theta_max_deg < 0.0 || theta_max_deg > 180.0)
        throw std::domain_error("solid_angle_fraction: theta outside [0, 180] deg");
    return 0.5 * (1.0 - std::cos(deg_to_rad(theta_max_deg)));
}

/// Focused Gaussian beam. The waist position is measured along the beam axis
/// from the ion (0 = focused on the ion).
struct BeamSpec {
    double wavelength_nm = 369.0;
    double waist_um = 50.0;
    double waist_position_mm = 0.0;
};

struct BeamClearance {
    double rayleigh_length_mm = 0.0;
    double diameter_at_gap_um = 0.0;
    bool pass = false;
};

/// Beam size where it crosses the gap, `distance_mm` from the ion along the
/// beam axis, checked against the gap width.
inline BeamClearance beam_clearance(const BeamSpec& beam, double distance_mm, double gap_width_um) {
    if (beam.wavelength_nm <= 0.0 || beam.waist_um <= 0.0 || distance_mm < 0.0 || gap_width_um <= 0.0)
        throw std::domain_error("beam_clearance: inputs must be positive");
    const double w0_mm = beam.waist_um * 1e-3;
    const double lambda_mm = beam.wavelength_nm * 1e-6;
    const double zr = constants::pi * w0_mm * w0_mm / lambda_mm;
    const double from_waist = distance_mm - beam.waist_position_mm;
    const double w = w0_mm * std::sqrt(1.0 + (from_waist / zr) * (from_waist / zr));
    BeamClearance c;
    c.rayleigh_length_mm = zr;
    c.diameter_at_gap_um = 2.0 * w * 1e3;
    c.pass = c.diameter_at_gap_um < gap_width_um;
    return c;
}

/// Product of the collection chain factors, each in [0, 1].
inline double efficiency_chain(double p_omega, double reflectivity, double fiber_coupling,
                               double transmission) {
    for (double f : {p_omega, reflectivity, fiber_coupling, transmission})
        if (f < 0.0 || f > 1.0) throw std::domain_error("efficiency_chain: factor outside [0, 1]");
    return p_omega * reflectivity * fiber_coupling * transmission;
}

/// Two-photon scheme: success rate scales with the square of the collection
/// efficiency relative to a measured baseline.
inline double entanglement_rate_hz(double base_rate_hz, double efficiency, double baseline_efficiency) {
    if (baseline_efficiency <= 0.0)
        throw std::domain_error("entanglement_rate: baseline efficiency must be positive");
    const double gain = efficiency / baseline_efficiency;
    return base_rate_hz * gain * gain;
}

/// Tunable factors of the optics chain, with the design defaults.
struct OpticsSettings {
    double reflectivity = 0.90;
    double fiber_coupling = 0.90;
    double transmission = 0.95;
    BeamSpec beam{};
    double gap_clearance_distance_mm = 2.1;   // quoted focus-to-gap distance
    double gap_clearance_width_um = 256.0;    // quoted clear gap width
    double baseline_rate_hz = 183.0;
    double baseline_efficiency = 0.10;
};

struct OpticsReport {
    double theta_max_deg = 0.0;
    double solid_angle_fraction = 0.0;
    double reflectivity = 0.0;
    double fiber_coupling = 0.0;
    double transmission = 0.0;
    double total_efficiency = 0.0;
    BeamClearance clearance{};
    double rate_estimate_hz = 0.0;
};

inline OpticsReport evaluate_optics(const ParaboloidSpec& spec, const OpticsSettings& s = {}) {
    OpticsReport r;
    r.theta_max_deg = theta_max_deg(spec);
    r.solid_angle_fraction = solid_angle_fraction(r.theta_max_deg);
    r.reflectivity = s.reflectivity;
    r.fiber_coupling = s.fiber_coupling;
    r.transmission = s.transmission;
    r.total_efficiency = efficiency_chain(r.solid_angle_fraction, s.reflectivity, s.fiber_coupling,
                                          s.transmission);
    r.clearance = beam_clearance(s.beam, s.gap_clearance_distance_mm, s.gap_clearance_width_um);
    r.rate_estimate_hz = entanglement_rate_hz(s.baseline_rate_hz, r.total_efficiency,
                                              s.baseline_efficiency);
    return r;
}

}  // namespace pmtrap
