#pragma once

// Physical parameters of the cascaded source -> probe pair and the drive
// bookkeeping that converts between flux axes (nu+/gamma, nu-/Gamma in dB)
// and bare drive amplitudes.
//
// Frame and tone conventions (fixed project-wide):
//  - everything is written in the frame rotating at the mean drive frequency
//    omega_d, so both drives are periodic with the beat period T = 2pi/d_omega;
//  - the tone labeled omega_s (s = +-1), at lab frequency omega_d + s*d_omega,
//    enters the Hamiltonian as  -i * sqrt(coupling) * (A sigma+ e^{+i s d_omega t} - h.c.)
//    and a qubit locked to it has <sigma-> rotating as e^{+i s d_omega t};
//  - harmonic order k therefore labels the sideband at omega_d + k*d_omega,
//    extracted as the coefficient of e^{+i k d_omega t}.
//
// By default the source tone sits at +d_omega and the probe tone at -d_omega
// (the experimental narrative). source_detuning_sign = -1 restores the
// printed-Hamiltonian assignment (source at -d_omega).

#include "qwm/bloch.hpp"
#include "qwm/errors.hpp"
#include "qwm/units.hpp"

#include <cmath>

namespace qwm {

struct CascadeParams {
    double gamma = 0.0;        // source radiative rate into the emission line, rad/s
    double Gamma = 0.0;        // probe radiative rate, rad/s
    double eta = 0.0;          // source control-line rate, rad/s
    double alpha = 1.0;        // amplitude transmission source -> probe, in [0,1]
    double delta_omega = 0.0;  // half detuning between the two tones, rad/s
    double detuning_source = 0.0;  // Delta_s = omega_s_qubit - omega_d, rad/s
    double detuning_probe = 0.0;   // Delta_p = omega_p_qubit - omega_d, rad/s
    double W = 0.0;            // source drive amplitude, sqrt(photon flux)
    double E = 0.0;            // probe drive amplitude, sqrt(photon flux)
    double gamma_phi = 0.0;    // source pure dephasing, rad/s
    double Gamma_phi = 0.0;    // probe pure dephasing, rad/s

    int source_detuning_sign = +1;     // +1: source tone at omega_d + d_omega
    double source_alpha_exponent = 0.5;  // alpha power in the detected source field

    void validate() const {
        if (gamma <= 0.0 || Gamma <= 0.0)
            throw param_error("CascadeParams: gamma and Gamma must be > 0");
        if (eta < 0.0) throw param_error("CascadeParams: eta must be >= 0");
        if (alpha < 0.0 || alpha > 1.0)
            throw param_error("CascadeParams: alpha must be in [0,1]");
        if (delta_omega <= 0.0)
            throw param_error("CascadeParams: delta_omega must be > 0");
        if (gamma_phi < 0.0 || Gamma_phi < 0.0)
            throw param_error("CascadeParams: dephasing rates must be >= 0");
        if (source_detuning_sign != 1 && source_detuning_sign != -1)
            throw param_error("CascadeParams: source_detuning_sign must be +-1");
    }

    int probe_detuning_sign() const { return -source_detuning_sign; }

    double gamma_total() const { return gamma + eta; }
    double gamma2() const { return 0.5 * gamma_total() + gamma_phi; }
    double Gamma2() const { return 0.5 * Gamma + Gamma_phi; }

    // Rabi rotation rates of the two classical drives.
    double source_rabi() const { return 2.0 * std::sqrt(eta) * W; }
    double probe_rabi() const { return 2.0 * std::sqrt(0.5 * Gamma) * E; }

    // Dimensionless amplitudes used by the perturbative expressions; defined
    // as the saturation parameters that make the weak-drive coherences equal
    // 2*Wbar/(1+8*Wbar^2) and 2*Ebar/(1+8*Ebar^2).
    double W_bar() const { return 0.5 * source_rabi() / gamma_total(); }
    double E_bar() const { return 0.5 * probe_rabi() / Gamma; }

    void set_W_bar(double wbar) {
        W = (eta > 0.0) ? wbar * gamma_total() / std::sqrt(eta) : 0.0;
    }
    void set_E_bar(double ebar) { E = ebar * std::sqrt(2.0 * Gamma); }

    // Drive detunings seen by each qubit in its own tone's frame: a drive
    // with phase e^{+i s d_omega t} on sigma+ is resonant with a qubit at
    // Delta = -s * d_omega, so the effective static detuning is Delta + s*d_omega.
    double source_drive_detuning() const {
        return detuning_source + source_detuning_sign * delta_omega;
    }
    double probe_drive_detuning() const {
        return detuning_probe + probe_detuning_sign() * delta_omega;
    }

    // Stationary coherence of the standalone source under its own tone.
    BlochSteadyState source_steady_state() const {
        return driven_qubit_steady_state(source_rabi(), source_drive_detuning(),
                                         gamma_total(), gamma_phi);
    }

    // Coherent photon flux emitted by the source into the emission line,
    // gamma * |<sigma_minus>|^2; this is the nu_+ axis of the mixing maps.
    double nu_plus() const {
        return gamma * std::norm(source_steady_state().sigma_minus());
    }

    // Photon flux of the probe's classical tone; nu_- = |E|^2.
    double nu_minus() const { return E * E; }
};

// Invert nu_+ = gamma * |<sigma_minus>(Omega)|^2 for the drive amplitude W.
// Two drive strengths produce the same coherent flux (below and above
// saturation); `upper_branch` selects the saturated solution.
inline double source_drive_for_flux(double nu_plus_target, const CascadeParams& p,
                                    bool upper_branch = false) {
    if (nu_plus_target < 0.0) throw param_error("nu_plus must be >= 0");
    if (nu_plus_target == 0.0) return 0.0;
    if (p.eta <= 0.0)
        throw param_error("source_drive_for_flux: eta must be > 0 to drive the source");
    const double g1 = p.gamma_total();
    const double g2 = p.gamma2();
    const double delta = p.source_drive_detuning();
    const double denom2 = g2 * g2 + delta * delta;
    // |<s->|^2 = (v * g1 / (4 g2)) / (1+v)^2 with v = Omega^2 g2 / (g1 denom2).
    const double target = nu_plus_target / p.gamma;
    const double a = target;
    const double b = 2.0 * target - g1 / (4.0 * g2);
    const double disc = b * b - 4.0 * a * a;
    if (disc < 0.0)
        throw param_error("source_drive_for_flux: requested nu_+ exceeds the "
                          "maximum coherent emission of the source");
    const double v = upper_branch ? (-b + std::sqrt(disc)) / (2.0 * a)
                                  : (-b - std::sqrt(disc)) / (2.0 * a);
    const double omega_rabi = std::sqrt(v * g1 * denom2 / g2);
    return 0.5 * omega_rabi / std::sqrt(p.eta);
}

// Probe drive amplitude from nu_- (photon flux of the classical tone).
inline double probe_drive_for_flux(double nu_minus_target) {
    if (nu_minus_target < 0.0) throw param_error("nu_minus must be >= 0");
    return std::sqrt(nu_minus_target);
}

} // namespace qwm
