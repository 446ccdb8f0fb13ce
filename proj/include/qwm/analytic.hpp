#pragma once

// Closed-form physics: the second-order correlation g2(tau) of resonance
// fluorescence, the probe-bandwidth-weighted antibunching integral, the
// classical bichromatic mixing amplitudes, the low-power transmission model,
// and the coherent emission amplitude of a driven emitter.

#include "qwm/bloch.hpp"
#include "qwm/errors.hpp"
#include "qwm/units.hpp"

#include <cmath>
#include <functional>

namespace qwm {

struct SourceDriveParams {
    double omega = 0.0;  // resonant Rabi rotation rate, rad/s
    double gamma = 0.0;  // radiative decay into the emission line, rad/s

    void validate() const {
        if (gamma <= 0.0) throw param_error("SourceDriveParams: gamma must be > 0");
        if (omega < 0.0) throw param_error("SourceDriveParams: Omega must be >= 0");
    }
};

// g2(tau) for stationary resonance fluorescence of a resonantly driven
// two-level emitter. Equal to the quantum-regression conditional excited
// population normalized by its stationary value; rises from g2(0) = 0 to 1,
// oscillating (between 0 and 2) for Omega > gamma/4 and continuing
// analytically through the overdamped branch below it.
inline double g2(double tau, const SourceDriveParams& src) {
    src.validate();
    if (tau < 0.0) throw param_error("g2: tau must be >= 0");
    return 1.0 - damped_rabi_relaxation_factor(src.omega, src.gamma, tau);
}

namespace detail {

// Adaptive Simpson quadrature with absolute tolerance. The integrands here
// are smooth and bounded, so plain bisection with the standard Richardson
// error estimate is enough.
inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a,
                                   double b, double fa, double fm, double fb, double whole,
                                   double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double abs_tol, int max_depth = 48) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, abs_tol, max_depth);
}

} // namespace detail

// Degree of effective antibunching: A = Gamma * int_0^{1/Gamma} g2(tau) dtau.
// Quantifies how non-classical the source field appears to a detector (the
// probe) of linewidth Gamma.
inline double antibunching_A(double gamma_probe, const SourceDriveParams& src,
                             double abs_tol = 1e-9) {
    src.validate();
    if (gamma_probe <= 0.0) throw param_error("antibunching_A: Gamma must be > 0");
    const double t_end = 1.0 / gamma_probe;
    // Split at the correlation time of g2 so the adaptive rule spends its
    // effort where the integrand still varies.
    const double t_corr = std::min(t_end, 10.0 / src.gamma);
    const auto f = [&](double t) { return g2(t, src); };
    double integral = detail::adaptive_simpson(f, 0.0, t_corr, 0.5 * abs_tol / gamma_probe);
    if (t_corr < t_end) {
        // Beyond ~10 correlation times g2 is 1 up to an exponentially small
        // remainder; integrate the remainder explicitly for full accuracy.
        integral += (t_end - t_corr);
        const auto rem = [&](double t) { return g2(t, src) - 1.0; };
        integral += detail::adaptive_simpson(rem, t_corr, t_end, 0.5 * abs_tol / gamma_probe);
    }
    return gamma_probe * integral;
}

// ---------------------------------------------------------------------------
// Classical bichromatic mixing on a single two-level scatterer.

enum class MixBranch { plus, minus };

struct ClassicalMixInputs {
    double kappa_plus = 0.0;       // nu_+ / Gamma = Omega_+^2 / (2 Gamma^2)
    double kappa_minus = 0.0;      // nu_- / Gamma
    double gamma2_over_gamma = 0.5;  // Gamma_2 / Gamma, >= 1/2 for physical dephasing
    int order = 0;                 // p >= 0; the peak sits at +-(2p+1)
    MixBranch branch = MixBranch::plus;

    void validate() const {
        if (kappa_plus < 0.0 || kappa_minus < 0.0)
            throw param_error("ClassicalMixInputs: kappa must be >= 0");
        if (gamma2_over_gamma < 0.5)
            throw param_error("ClassicalMixInputs: Gamma_2/Gamma < 1/2 is unphysical");
        if (order < 0) throw param_error("ClassicalMixInputs: order must be >= 0");
    }
};

// Signed amplitude sqrt(kappa^sc) of the forward output-field component at
// omega_{b(2p+1)} = (p+1) omega_b - p omega_{b'}, in sqrt(flux)/sqrt(Gamma)
// units, with theta = arcsin(4 sqrt(k+ k-) / (Gamma2/Gamma + 2(k+ + k-))):
//
//   sqrt(kappa_b) delta_{p0}
//     + ((-1)^p / (8 sqrt(k+ k-))) tan(theta) tan^p(theta/2)
//       * (sqrt(kappa_b') tan(theta/2) - sqrt(kappa_b)),   b' = other branch.
//
// The p = 0 components are the net transmitted peaks (carrier minus the
// coherently scattered field); the p >= 1 components are pure mixing
// sidebands. The opposite-branch pairing inside the parenthesis is what
// reproduces both the perturbative photon-number scaling
// kappa_b^{(p+1)/2} kappa_b'^{p/2} and the bichromatic master-equation
// oracle to sub-percent accuracy; pairing the peak's own branch first
// fails both checks away from kappa_+ = kappa_-.
inline double classical_mixing_amplitude(const ClassicalMixInputs& in) {
    in.validate();
    const double kb = in.branch == MixBranch::plus ? in.kappa_plus : in.kappa_minus;
    const double ko = in.branch == MixBranch::plus ? in.kappa_minus : in.kappa_plus;
    const double p = in.order;

    const double denom = in.gamma2_over_gamma + 2.0 * (in.kappa_plus + in.kappa_minus);
    const double sarg = 4.0 * std::sqrt(in.kappa_plus * in.kappa_minus) / denom;
    if (sarg > 1.0 + 1e-12)
        throw param_error("classical_mixing_amplitude: arcsin argument exceeds 1");

    const double carrier = (in.order == 0) ? std::sqrt(kb) : 0.0;

    // tan(theta) / (8 sqrt(k+ k-)) stays finite as either drive vanishes.
    double ladder, half_tan;
    if (in.kappa_plus * in.kappa_minus == 0.0) {
        if (in.order >= 1) return 0.0;  // tan^p(theta/2) kills all higher orders
        ladder = 0.5 / denom;
        half_tan = 0.0;
    } else {
        const double theta = std::asin(std::min(1.0, sarg));
        ladder = std::tan(theta) / (8.0 * std::sqrt(in.kappa_plus * in.kappa_minus));
        ladder *= std::pow(std::tan(0.5 * theta), p);
        half_tan = std::tan(0.5 * theta);
    }
    const double sign = (in.order % 2 == 0) ? 1.0 : -1.0;
    return carrier + sign * ladder * (std::sqrt(ko) * half_tan - std::sqrt(kb));
}

// ---------------------------------------------------------------------------
// Low-power transmission of the cascade (spectroscopy model).

struct TransmissionParams {
    double gamma = 0.0;        // source radiative rate, rad/s
    double gamma_phi = 0.0;    // source pure dephasing, rad/s
    double Gamma = 0.0;        // probe radiative rate, rad/s
    double Gamma_phi = 0.0;    // probe pure dephasing, rad/s
    double omega_s = 0.0;      // source transition frequency, rad/s
    double omega_p = 0.0;      // probe transition frequency, rad/s
    double cc_over_ce = 0.1;   // control-to-emission capacitance ratio
    double prefactor = 1.0;    // alpha * sqrt(A G), lumped scalar

    double gamma2() const { return 0.5 * gamma + gamma_phi; }
    double Gamma2() const { return 0.5 * Gamma + Gamma_phi; }

    void validate() const {
        if (gamma <= 0.0 || Gamma <= 0.0)
            throw param_error("TransmissionParams: gamma, Gamma must be > 0");
        if (gamma_phi < 0.0 || Gamma_phi < 0.0)
            throw param_error("TransmissionParams: dephasing rates must be >= 0");
    }
};

inline complexd transmission_source_factor(double omega, const TransmissionParams& p) {
    const double g2r = p.gamma2();
    const double d = (p.omega_s - omega) / g2r;
    return (0.5 * p.gamma / g2r) * p.cc_over_ce * complexd(1.0, d) / (1.0 + d * d);
}

inline complexd transmission_probe_factor(double omega, const TransmissionParams& p) {
    const double g2r = p.Gamma2();
    const double d = (p.omega_p - omega) / g2r;
    return 1.0 - (0.5 * p.Gamma / g2r) * complexd(1.0, d) / (1.0 + d * d);
}

inline complexd transmission(double omega, bool probe_enabled, const TransmissionParams& p) {
    p.validate();
    complexd t = p.prefactor * transmission_source_factor(omega, p);
    if (probe_enabled) t *= transmission_probe_factor(omega, p);
    return t;
}

// ---------------------------------------------------------------------------
// Coherent emission amplitude of the driven source.

struct CoherentEmission {
    complexd amplitude;  // -i * gamma * <sigma_minus>_ss
    double flux;         // gamma * |<sigma_minus>_ss|^2, photons/s
    complexd sigma_minus;
};

inline CoherentEmission coherent_emission_amplitude(const SourceDriveParams& src,
                                                    double detuning = 0.0,
                                                    double gamma_phi = 0.0) {
    src.validate();
    const BlochSteadyState ss =
        driven_qubit_steady_state(src.omega, detuning, src.gamma, gamma_phi);
    CoherentEmission out;
    out.sigma_minus = ss.sigma_minus();
    out.amplitude = -iu * src.gamma * out.sigma_minus;
    out.flux = src.gamma * std::norm(out.sigma_minus);
    return out;
}

} // namespace qwm
