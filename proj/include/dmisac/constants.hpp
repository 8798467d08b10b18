#pragma once

#include <cmath>

namespace dmisac {

inline constexpr double kSpeedOfLight = 299792458.0;        // m/s
inline constexpr double kBoltzmann = 1.380649e-23;          // J/K
inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Power conversions between dB domain and linear domain.
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }
inline double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
inline double watts_to_dbm(double w) { return 10.0 * std::log10(w / 1e-3); }

/// Carrier wavelength in meters.
inline double wavelength(double carrier_hz) { return kSpeedOfLight / carrier_hz; }

}  // namespace dmisac
