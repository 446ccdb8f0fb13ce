#pragma once

// Unit conventions used throughout:
//  - angular rates (decay rates, detunings, Rabi rates) in rad/s internally
//  - configs and reports use f = omega/2pi in MHz, and dB for power ratios
//  - drive amplitudes W, E in sqrt(photon flux) units, i.e. s^{-1/2}

#include <cmath>
#include <complex>
#include <numbers>

namespace qwm {

using complexd = std::complex<double>;
inline constexpr complexd iu{0.0, 1.0};
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline double mhz_to_rad(double f_mhz) { return two_pi * f_mhz * 1e6; }
inline double rad_to_mhz(double w) { return w / (two_pi * 1e6); }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

} // namespace qwm
