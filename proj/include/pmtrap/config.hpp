#pragma once

// Workbench configuration: flat `key = value` text with explicit units in
// the key names. Unknown keys are rejected and every diagnostic carries its
// line number; a config either parses to a fully validated state or throws.

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmtrap/dc_compensation.hpp"
#include "pmtrap/dynamics.hpp"
#include "pmtrap/field_engine.hpp"
#include "pmtrap/geometry.hpp"
#include "pmtrap/optics.hpp"
#include "pmtrap/pseudopotential.hpp"

namespace pmtrap {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> diags)
        : std::runtime_error(join(diags)), diagnostics(std::move(diags)) {}
    std::vector<std::string> diagnostics;

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s = "configuration invalid:";
        for (const auto& d : v) s += "\n  " + d;
        return s;
    }
};

struct TrajectorySettings {
    Vec3 start_mm{0.05, 0.0, 2.1};
    Vec3 velocity_mm_per_us{};
    double duration_us = 320.0;
    double dt_ns = 0.0;  // 0 = RF period / 64
    int sample_stride = 16;
};

struct WorkbenchConfig {
    ElectrodeLayout layout = ElectrodeLayout::reference();
    IonSpecies ion{};
    RfDrive drive = RfDrive::operating_point();
    DcOffsets dc_offsets{};
    PairVoltages dc_pairs{};
    MeshParams mesh = MeshParams::reference();
    std::string resolution_name = "reference";
    OpticsSettings optics{};
    TrajectorySettings trajectory{};
    double sensitivity_voltage_step_volt = 2.0;
    double sensitivity_edge_step_um = 10.0;
    bool strict_ranges = false;
    std::uint64_t text_hash = 0;

    void apply_resolution(const std::string& name) {
        if (name == "coarse") mesh = MeshParams::coarse();
        else if (name == "reference") mesh = MeshParams::reference();
        else if (name == "fine") mesh = MeshParams::fine();
        else {
            try {
                mesh.step = std::stod(name);
            } catch (...) {
                throw std::invalid_argument("unknown resolution '" + name +
                                            "' (coarse, reference, fine or a step value)");
            }
            if (mesh.step <= 0.0) throw std::invalid_argument("resolution step must be positive");
        }
        resolution_name = name;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

/// Parses configuration text. `origin` names the source in diagnostics.
inline WorkbenchConfig parse_config_text(const std::string& text, const std::string& origin) {
    WorkbenchConfig cfg;
    cfg.text_hash = fnv1a(text);
    std::vector<std::string> diags;

    std::map<std::string, std::function<void(double)>> num;
    num["focal_length_mm"] = [&](double v) { cfg.layout.spec.focal_length_mm = v; };
    num["aperture_diameter_mm"] = [&](double v) { cfg.layout.spec.aperture_diameter_mm = v; };
    num["depth_mm"] = [&](double v) {
        cfg.layout.spec.depth_mm = v;
        cfg.layout.segment(5).z_upper_mm = v;
    };
    for (int s = 1; s <= 5; ++s) {
        num["seg" + std::to_string(s) + "_lower_mm"] = [&cfg, s](double v) {
            cfg.layout.segment(s).z_lower_mm = v;
        };
        num["seg" + std::to_string(s) + "_upper_mm"] = [&cfg, s](double v) {
            cfg.layout.segment(s).z_upper_mm = v;
        };
    }
    num["ion_mass_u"] = [&](double v) { cfg.ion.mass_u = v; };
    num["ion_charge_e"] = [&](double v) { cfg.ion.charge_e = v; };
    num["rf_frequency_mhz"] = [&](double v) { cfg.drive.frequency_mhz = v; };
    num["rf_v2_volt"] = [&](double v) { cfg.drive.v2 = v; };
    num["rf_v3_volt"] = [&](double v) { cfg.drive.v3 = v; };
    num["rf_v4_volt"] = [&](double v) { cfg.drive.v4 = v; };
    num["dc_v1_volt"] = [&](double v) { cfg.dc_offsets.v1_volt = v; };
    num["dc_v5_volt"] = [&](double v) { cfg.dc_offsets.v5_volt = v; };
    num["dc_u1_volt"] = [&](double v) { cfg.dc_pairs.u1 = v; };
    num["dc_u2_volt"] = [&](double v) { cfg.dc_pairs.u2 = v; };
    num["dc_u3_volt"] = [&](double v) { cfg.dc_pairs.u3 = v; };
    num["cap_extension"] = [&](double v) { cfg.mesh.cap_extension = v; };
    num["optics_reflectivity"] = [&](double v) { cfg.optics.reflectivity = v; };
    num["optics_fiber_coupling"] = [&](double v) { cfg.optics.fiber_coupling = v; };
    num["optics_transmission"] = [&](double v) { cfg.optics.transmission = v; };
    num["beam_wavelength_nm"] = [&](double v) { cfg.optics.beam.wavelength_nm = v; };
    num["beam_waist_um"] = [&](double v) { cfg.optics.beam.waist_um = v; };
    num["beam_waist_position_mm"] = [&](double v) { cfg.optics.beam.waist_position_mm = v; };
    num["gap_clearance_distance_mm"] = [&](double v) { cfg.optics.gap_clearance_distance_mm = v; };
    num["gap_clearance_width_um"] = [&](double v) { cfg.optics.gap_clearance_width_um = v; };
    num["baseline_rate_hz"] = [&](double v) { cfg.optics.baseline_rate_hz = v; };
    num["baseline_efficiency"] = [&](double v) { cfg.optics.baseline_efficiency = v; };
    num["trajectory_start_x_mm"] = [&](double v) { cfg.trajectory.start_mm.x = v; };
    num["trajectory_start_y_mm"] = [&](double v) { cfg.trajectory.start_mm.y = v; };
    num["trajectory_start_z_mm"] = [&](double v) { cfg.trajectory.start_mm.z = v; };
    num["trajectory_velocity_x_mm_per_us"] = [&](double v) { cfg.trajectory.velocity_mm_per_us.x = v; };
    num["trajectory_velocity_y_mm_per_us"] = [&](double v) { cfg.trajectory.velocity_mm_per_us.y = v; };
    num["trajectory_velocity_z_mm_per_us"] = [&](double v) { cfg.trajectory.velocity_mm_per_us.z = v; };
    num["trajectory_duration_us"] = [&](double v) { cfg.trajectory.duration_us = v; };
    num["trajectory_dt_ns"] = [&](double v) { cfg.trajectory.dt_ns = v; };
    num["trajectory_sample_stride"] = [&](double v) { cfg.trajectory.sample_stride = static_cast<int>(v); };
    num["sensitivity_voltage_step_volt"] = [&](double v) { cfg.sensitivity_voltage_step_volt = v; };
    num["sensitivity_edge_step_um"] = [&](double v) { cfg.sensitivity_edge_step_um = v; };

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto where = origin + ":" + std::to_string(lineno);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            diags.push_back(where + ": expected 'key = value'");
            continue;
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            diags.push_back(where + ": empty key or value");
            continue;
        }
        if (key == "resolution") {
            try {
                cfg.apply_resolution(value);
            } catch (const std::exception& e) {
                diags.push_back(where + ": " + e.what());
            }
            continue;
        }
        if (key == "strict_ranges") {
            if (value == "on" || value == "true") cfg.strict_ranges = true;
            else if (value == "off" || value == "false") cfg.strict_ranges = false;
            else diags.push_back(where + ": strict_ranges must be on/off");
            continue;
        }
        const auto it = num.find(key);
        if (it == num.end()) {
            diags.push_back(where + ": unknown key '" + key + "'");
            continue;
        }
        try {
            std::size_t used = 0;
            const double v = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument("trailing characters");
            it->second(v);
        } catch (const std::exception&) {
            diags.push_back(where + ": cannot parse number '" + value + "'");
        }
    }

    // semantic validation
    if (cfg.ion.mass_u <= 0.0) diags.push_back(origin + ": ion_mass_u must be positive");
    if (cfg.ion.charge_e < 1.0) diags.push_back(origin + ": ion_charge_e must be at least 1");
    if (cfg.drive.frequency_mhz <= 0.0) diags.push_back(origin + ": rf_frequency_mhz must be positive");
    for (const auto& v : validate_layout(cfg.layout))
        if (v.structural()) diags.push_back(origin + ": layout: " + v.message);
    if (!diags.empty()) throw ConfigError(std::move(diags));
    return cfg;
}

inline WorkbenchConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({path + ": cannot open configuration file"});
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

/// Template configuration mirroring the built-in defaults.
inline std::string default_config_text() {
    return R"(# parabolic-mirror trap workbench configuration
# geometry (mm)
focal_length_mm = 2.1
aperture_diameter_mm = 31.5
depth_mm = 29.5
seg1_lower_mm = 0.000
seg1_upper_mm = 0.256
seg2_lower_mm = 0.296
seg2_upper_mm = 1.096
seg3_lower_mm = 1.136
seg3_upper_mm = 1.900
seg4_lower_mm = 2.300
seg4_upper_mm = 3.000
seg5_lower_mm = 3.040

# ion and drive
ion_mass_u = 171
ion_charge_e = 1
rf_frequency_mhz = 20.0
rf_v2_volt = 819.20
rf_v3_volt = 541.00
rf_v4_volt = 712.75
dc_v1_volt = 0.35
dc_v5_volt = 0.50
dc_u1_volt = 0.0
dc_u2_volt = 0.0
dc_u3_volt = 0.0

# solver
resolution = reference

# collection optics
optics_reflectivity = 0.90
optics_fiber_coupling = 0.90
optics_transmission = 0.95
beam_wavelength_nm = 369
beam_waist_um = 50
gap_clearance_distance_mm = 2.1
gap_clearance_width_um = 256
baseline_rate_hz = 183
baseline_efficiency = 0.10

# trajectory runs
trajectory_start_x_mm = 0.05
trajectory_start_y_mm = 0.0
trajectory_start_z_mm = 2.1
trajectory_duration_us = 320
trajectory_sample_stride = 16
)";
}

}  // namespace pmtrap
