#pragma once

// Unit conventions: everything inside the library is SI (m, s, K, W, J,
// rad/s). User-facing boundaries (CLI, config, CSV files) carry explicit
// unit suffixes and convert here, at parse/emit time.

namespace atomscope::units {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;
inline constexpr double speed_of_light = 299792458.0;  // m/s

inline constexpr double nm = 1e-9;
inline constexpr double um = 1e-6;
inline constexpr double mm = 1e-3;
inline constexpr double uK = 1e-6;
inline constexpr double us = 1e-6;
inline constexpr double ms = 1e-3;
inline constexpr double pW = 1e-12;
inline constexpr double nW = 1e-9;
inline constexpr double kHz = 1e3;
inline constexpr double MHz = 1e6;

inline constexpr double deg_to_rad(double deg) { return deg * pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / pi; }

}  // namespace atomscope::units
