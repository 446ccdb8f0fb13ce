#pragma once

// Closed-form results for a single driven two-level system with radiative
// decay and optional pure dephasing. Conventions:
//   - Omega is the resonant Rabi rotation rate (the drive term in the
//     rotating frame is (Omega/2) * sigma_y for a real amplitude),
//   - gamma_total is the T1 rate (population decays as exp(-gamma_total*t)),
//   - gamma2 = gamma_total/2 + gamma_phi is the coherence decay rate.

#include "qwm/units.hpp"

#include <cmath>

namespace qwm {

struct BlochSteadyState {
    double x = 0.0, y = 0.0, z = -1.0;

    complexd sigma_minus() const { return 0.5 * complexd(x, -y); }
    double excited_population() const { return 0.5 * (1.0 + z); }
};

// Stationary Bloch vector under a drive detuned by `delta` from the qubit.
// Bloch equations: x' = -g2 x - delta y + Omega z,
//                  y' = +delta x - g2 y,
//                  z' = -Omega x - g1 (1 + z).
inline BlochSteadyState driven_qubit_steady_state(double omega_rabi, double delta,
                                                  double gamma_total, double gamma_phi = 0.0) {
    const double g1 = gamma_total;
    const double g2 = 0.5 * gamma_total + gamma_phi;
    BlochSteadyState s;
    if (omega_rabi == 0.0) return s;
    const double denom2 = g2 * g2 + delta * delta;
    const double v = omega_rabi * omega_rabi * g2 / (g1 * denom2);
    s.z = -1.0 / (1.0 + v);
    s.x = omega_rabi * s.z * g2 / denom2;
    s.y = delta * s.x / g2;
    return s;
}

// Population of an initially inverted, undriven qubit: exp(-gamma*t).
inline double free_decay_population(double gamma_total, double t) {
    return std::exp(-gamma_total * t);
}

// Relaxation factor R(t) of the resonantly driven qubit with pure radiative
// decay: the excited population from the ground state is P_ss * (1 - R(t)),
//   R(t) = exp(-3*gamma*t/4) * [cos(mu t) + (3 gamma / 4 mu) sin(mu t)],
//   mu = sqrt(Omega^2 - gamma^2/16),
// continued analytically (cosh/sinh) for Omega < gamma/4. The hyperbolic
// branch is evaluated in split-exponential form so that large gamma*t does
// not overflow.
inline double damped_rabi_relaxation_factor(double omega_rabi, double gamma, double t) {
    const double disc = omega_rabi * omega_rabi - gamma * gamma / 16.0;
    const double decay = 0.75 * gamma;
    if (disc >= 0.0) {
        const double mu = std::sqrt(disc);
        const double mt = mu * t;
        const double sinc = (mt < 1e-8) ? t * (1.0 - mt * mt / 6.0) : std::sin(mt) / mu;
        return std::exp(-decay * t) * (std::cos(mt) + decay * sinc);
    }
    const double mu = std::sqrt(-disc);
    const double mt = mu * t;
    if (mt < 1e-4) {
        const double sinhc = t * (1.0 + mt * mt / 6.0 + mt * mt * mt * mt / 120.0);
        return std::exp(-decay * t) * (std::cosh(mt) + decay * sinhc);
    }
    // mu < decay always holds on this branch, so both exponents are negative.
    const double c = decay / mu;
    return 0.5 * (1.0 + c) * std::exp((mu - decay) * t) +
           0.5 * (1.0 - c) * std::exp(-(mu + decay) * t);
}

// Excited population of a resonantly driven qubit starting from the ground
// state (quantum-regression conditional state after a photodetection).
inline double damped_rabi_excited_population(double omega_rabi, double gamma, double t) {
    const double r = 2.0 * omega_rabi * omega_rabi / (gamma * gamma);
    const double pss = 0.5 * r / (1.0 + r);
    return pss * (1.0 - damped_rabi_relaxation_factor(omega_rabi, gamma, t));
}

} // namespace qwm
