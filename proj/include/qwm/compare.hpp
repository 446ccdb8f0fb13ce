#pragma once

// Quantum-vs-classical comparison at one operating point: run the cascade,
// then drive a single probe with two classical tones whose amplitudes are
// adjusted until the detected peaks at +-1 match the cascaded run, and
// compare the sideband powers. This mirrors the experimental procedure of
// matching the omega_+- peaks before reading off the mixing products.

#include "qwm/integrator.hpp"
#include "qwm/params.hpp"
#include "qwm/spectrum.hpp"

#include <cmath>
#include <vector>

namespace qwm {

struct CompareClassicalQuantum {
    SidebandSpectrum quantum;
    SidebandSpectrum classical;
    double matched_E_plus = 0.0;   // classical tone amplitudes, sqrt(flux)
    double matched_E_minus = 0.0;
    double match_residual_db = 0.0;
    std::vector<int> sideband_orders;
    std::vector<double> quantum_minus_classical_db;  // per sideband order
};

struct CompareOptionsCQ {
    int n_periods = 2;
    int samples_per_period = 256;
    std::vector<int> orders = odd_orders_up_to(7);
    StepControl control{};
    double match_tol_db = 1e-3;
    int max_match_iterations = 40;
};

namespace detail {

// Detected classical field of the bichromatic probe in sqrt(flux) units.
inline SidebandSpectrum classical_detected_spectrum(const BichromaticQubitParams& bp,
                                                    const CompareOptionsCQ& opt) {
    StepControl control = opt.control;
    control.settle_periods = std::max(1.0, control.settle_periods / 5.0);
    const QubitTrajectory traj =
        single_qubit_bichromatic(bp, opt.n_periods, opt.samples_per_period, control);
    std::vector<complexd> series(traj.sigma.size());
    const double w = std::sqrt(0.5 * bp.Gamma);
    for (size_t i = 0; i < series.size(); ++i) {
        series[i] = w * traj.sigma[i] +
                    bp.E_plus * std::polar(1.0, bp.delta_omega * traj.times[i]) +
                    bp.E_minus * std::polar(1.0, -bp.delta_omega * traj.times[i]);
    }
    return fourier_components(series, traj.times, bp.delta_omega, traj.n_periods,
                              traj.samples_per_period, opt.orders);
}

} // namespace detail

inline CompareClassicalQuantum compare_classical_quantum(const CascadeParams& params,
                                                         const CompareOptionsCQ& opt = {}) {
    params.validate();
    CompareClassicalQuantum out;

    const Trajectory traj =
        steady_cycle(params, opt.n_periods, opt.samples_per_period, opt.control);
    const auto series = detected_field(traj, params, DetectionMode::full);
    out.quantum = fourier_components(traj, series, opt.orders);

    const double target_plus = std::abs(out.quantum.amplitude(+1));
    const double target_minus = std::abs(out.quantum.amplitude(-1));
    if (target_plus <= 0.0 || target_minus <= 0.0)
        throw param_error("compare_classical_quantum: vanishing +-1 peaks cannot be "
                          "matched");

    BichromaticQubitParams bp;
    bp.Gamma = params.Gamma;
    bp.Gamma_phi = params.Gamma_phi;
    bp.detuning = params.detuning_probe;
    bp.delta_omega = params.delta_omega;

    // Initial guess: the probe's own tone and the mean-field equivalent of
    // the source emission (coupling alpha sqrt(gamma Gamma) sigma-_s acts as
    // a drive of amplitude alpha sqrt(2 gamma) <sigma-_s>).
    const double a_s = std::abs(params.source_steady_state().sigma_minus());
    double ep = std::max(1e-12, params.alpha * std::sqrt(2.0 * params.gamma) * a_s);
    double em = std::max(1e-12, std::abs(params.E));
    if (params.source_detuning_sign < 0) std::swap(ep, em);

    // Newton iteration in log amplitudes; the peak magnitudes are smooth and
    // monotone in the tone amplitudes at these drive strengths.
    const auto peaks = [&](double eplus, double eminus) {
        BichromaticQubitParams b = bp;
        b.E_plus = eplus;
        b.E_minus = eminus;
        const auto spec = detail::classical_detected_spectrum(b, opt);
        return std::pair<double, double>(std::abs(spec.amplitude(+1)),
                                         std::abs(spec.amplitude(-1)));
    };

    double res_db = 1e300;
    for (int it = 0; it < opt.max_match_iterations; ++it) {
        const auto [pp, pm] = peaks(ep, em);
        const double f1 = std::log(pp / target_plus);
        const double f2 = std::log(pm / target_minus);
        res_db = 10.0 * std::max(std::abs(f1), std::abs(f2)) / std::log(10.0);
        if (res_db <= opt.match_tol_db) break;

        const double h = 1e-4;
        const auto [pp1, pm1] = peaks(ep * std::exp(h), em);
        const auto [pp2, pm2] = peaks(ep, em * std::exp(h));
        const double j11 = std::log(pp1 / pp) / h, j12 = std::log(pp2 / pp) / h;
        const double j21 = std::log(pm1 / pm) / h, j22 = std::log(pm2 / pm) / h;
        const double det = j11 * j22 - j12 * j21;
        if (std::abs(det) < 1e-12)
            throw convergence_error("compare_classical_quantum: singular match "
                                    "Jacobian", res_db);
        double d1 = (-f1 * j22 + f2 * j12) / det;
        double d2 = (-j11 * f2 + j21 * f1) / det;
        d1 = std::clamp(d1, -1.0, 1.0);  // one e-fold per step keeps it stable
        d2 = std::clamp(d2, -1.0, 1.0);
        ep *= std::exp(d1);
        em *= std::exp(d2);
    }
    if (res_db > opt.match_tol_db)
        throw convergence_error("compare_classical_quantum: peak matching did not "
                                "converge", res_db);

    BichromaticQubitParams matched = bp;
    matched.E_plus = ep;
    matched.E_minus = em;
    out.classical = detail::classical_detected_spectrum(matched, opt);
    out.matched_E_plus = ep;
    out.matched_E_minus = em;
    out.match_residual_db = res_db;

    for (int k : opt.orders) {
        if (k == 1 || k == -1) continue;
        out.sideband_orders.push_back(k);
        out.quantum_minus_classical_db.push_back(out.quantum.power_db(k) -
                                                 out.classical.power_db(k));
    }
    return out;
}

} // namespace qwm
