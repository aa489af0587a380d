#pragma once

#include <cmath>

// Linear powers inside the library are watts; the compression parameter ρ is
// therefore in 1/W. dB and dBm only appear at the configuration boundary.
namespace dirtytx::units {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

}  // namespace dirtytx::units
