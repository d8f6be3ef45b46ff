#pragma once

// Shared value types, physical constants and small utilities.
//
// Unit conventions across the library:
//   lengths        mm        (CLI/CSV columns carry explicit units)
//   potentials     V
//   electric field V/m at public interfaces
//   energies       eV
//   frequencies    MHz for drives, kHz for secular motion, rad/s internally

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmtrap {

namespace constants {
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double elementary_charge_c = 1.602176634e-19;   // C
inline constexpr double atomic_mass_kg = 1.66053906660e-27;      // kg
}  // namespace constants

/// Cartesian point/vector, lengths in mm unless stated otherwise.
struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double deg_to_rad(double d) { return d * constants::pi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / constants::pi; }

/// Closed numeric interval [lo, hi].
struct Interval {
    double lo = 0.0, hi = 0.0;

    double width() const { return hi - lo; }
    double center() const { return 0.5 * (lo + hi); }
    bool contains(double v) const { return v >= lo && v <= hi; }
};

/// FNV-1a over raw bytes; used for cache keys and config fingerprints.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t seed = 1469598103934665603ull) {
    return fnv1a(s.data(), s.size(), seed);
}

inline std::uint64_t hash_doubles(const double* v, std::size_t n, std::uint64_t seed = 1469598103934665603ull) {
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &v[i], sizeof bits);
        h = fnv1a(&bits, sizeof bits, h);
    }
    return h;
}

inline std::string hex16(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

}  // namespace pmtrap
