#pragma once

#include <cmath>

namespace qloss {
namespace constants {

// CODATA 2018. Energies in eV, lengths in um, times in s throughout the
// library; powers in W and photon energies in J only inside photon_number.
inline constexpr double k_B = 8.617333262e-5;     // eV / K
inline constexpr double hbar = 6.582119569e-16;   // eV s
inline constexpr double hbar_J = 1.054571817e-34; // J s
inline constexpr double bcs_gap_ratio = 1.76;     // Delta(0) / (k_B T_c)

} // namespace constants

inline double dbm_to_watts(double p_dbm) { return 1e-3 * std::pow(10.0, p_dbm / 10.0); }

} // namespace qloss
