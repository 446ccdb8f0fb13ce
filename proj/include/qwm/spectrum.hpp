#pragma once

// Coherent emission spectrum of the quasi-stationary cycle: the detected
// field time series and its Fourier coefficients on exact harmonics of the
// beat frequency. A rectangular window over an integer number of periods puts
// every tone exactly on a DFT bin, so there is no leakage to suppress.

#include "qwm/integrator.hpp"
#include "qwm/params.hpp"

#include <cmath>
#include <map>
#include <vector>

namespace qwm {

enum class DetectionMode { full, probe_only };

// Detected output field in the rotating frame,
//   E e^{+i s_E d_omega t} + alpha^q sqrt(gamma) <sigma-_s>(t)
//                          + sqrt(Gamma/2) <sigma-_p>(t),
// in sqrt(photon flux) units. The probe term alone is available for
// diagnostics. The alpha exponent q is configurable (default 1/2); the
// sqrt(gamma) weight makes |amplitude|^2 at the source line equal the
// delivered coherent flux.
inline std::vector<complexd> detected_field(const Trajectory& traj,
                                            const CascadeParams& params,
                                            DetectionMode mode = DetectionMode::full) {
    params.validate();
    const size_t n = traj.sigma_p.size();
    if (n == 0 || traj.times.size() != n)
        throw param_error("detected_field: trajectory has no sampled data");

    std::vector<complexd> out(n);
    const double w_probe = std::sqrt(0.5 * params.Gamma);
    for (size_t i = 0; i < n; ++i) out[i] = w_probe * traj.sigma_p[i];

    if (mode == DetectionMode::full) {
        const double w_source =
            std::pow(params.alpha, params.source_alpha_exponent) * std::sqrt(params.gamma);
        const double s_e = params.probe_detuning_sign();
        for (size_t i = 0; i < n; ++i) {
            const complexd carrier =
                params.E * std::polar(1.0, s_e * params.delta_omega * traj.times[i]);
            out[i] += carrier + w_source * traj.sigma_s[i];
        }
    }
    return out;
}

struct SidebandSpectrum {
    std::vector<int> orders;
    std::vector<complexd> amplitudes;  // Fourier coefficient per order
    std::vector<double> powers;        // |amplitude|^2, photon flux

    complexd amplitude(int order) const {
        for (size_t i = 0; i < orders.size(); ++i)
            if (orders[i] == order) return amplitudes[i];
        throw param_error("SidebandSpectrum: order not present");
    }
    double power(int order) const { return std::norm(amplitude(order)); }
    double power_db(int order, double gain_db = 0.0) const {
        return linear_to_db(std::max(power(order), 1e-300)) + gain_db;
    }
};

// Fourier coefficient of e^{+i k d_omega t} for each requested order k:
//   c_k = (1/N) sum_j series_j e^{-i k d_omega t_j},
// over a series sampled uniformly on exactly n_periods beat periods. Times
// are absolute so the coefficients keep the drive phase reference.
inline SidebandSpectrum fourier_components(const std::vector<complexd>& series,
                                           const std::vector<double>& times,
                                           double delta_omega, int n_periods,
                                           int samples_per_period,
                                           const std::vector<int>& orders) {
    const size_t n = series.size();
    if (n == 0 || times.size() != n)
        throw param_error("fourier_components: empty or mismatched series");
    const size_t block = static_cast<size_t>(n_periods) * samples_per_period;
    if (block == 0 || n % block != 0)
        throw param_error("fourier_components: sample count is not an integer number "
                          "of periods");
    const double interval = times[1] - times[0];
    for (size_t i = 1; i + 1 < n; ++i)
        if (std::abs((times[i + 1] - times[i]) - interval) > 1e-9 * interval)
            throw param_error("fourier_components: nonuniform sample spacing");

    SidebandSpectrum out;
    out.orders = orders;
    out.amplitudes.resize(orders.size());
    out.powers.resize(orders.size());
    for (size_t q = 0; q < orders.size(); ++q) {
        complexd acc = 0.0;
        const double w = orders[q] * delta_omega;
        for (size_t j = 0; j < n; ++j)
            acc += series[j] * std::polar(1.0, -w * times[j]);
        out.amplitudes[q] = acc / static_cast<double>(n);
        out.powers[q] = std::norm(out.amplitudes[q]);
    }
    return out;
}

inline SidebandSpectrum fourier_components(const Trajectory& traj,
                                           const std::vector<complexd>& series,
                                           const std::vector<int>& orders) {
    return fourier_components(series, traj.times, two_pi / traj.period, traj.n_periods,
                              traj.samples_per_period, orders);
}

inline SidebandSpectrum fourier_components(const QubitTrajectory& traj,
                                           const std::vector<int>& orders) {
    return fourier_components(traj.sigma, traj.times, two_pi / traj.period,
                              traj.n_periods, traj.samples_per_period, orders);
}

inline std::vector<int> odd_orders_up_to(int max_abs) {
    std::vector<int> orders;
    for (int k = -max_abs; k <= max_abs; ++k)
        if (k % 2 != 0) orders.push_back(k);
    return orders;
}

// Mean squared value of a series; Parseval partner of the summed |c_k|^2.
inline double mean_square(const std::vector<complexd>& series) {
    double acc = 0.0;
    for (const auto& s : series) acc += std::norm(s);
    return acc / static_cast<double>(series.size());
}

} // namespace qwm
