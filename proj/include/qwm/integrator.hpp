#pragma once

// Fixed-step RK4 integration of the rotating-frame master equation, the
// quasi-stationary cycle detector, and the single-qubit bichromatic runs
// used as oracles. Fixed (not adaptive) stepping keeps the sample grid
// uniform, which the Fourier extraction needs, and makes runs bit-for-bit
// deterministic for identical inputs.

#include "qwm/liouvillian.hpp"
#include "qwm/params.hpp"
#include "qwm/two_qubit.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace qwm {

struct StepControl {
    double dt_override = 0.0;       // > 0 forces the raw step before snapping
    double safety = 0.05;           // dt <= safety * fastest timescale
    long max_steps = 500'000'000;
    int validate_every = 256;       // trace/hermiticity/PSD cadence, in steps
    StateTolerances tolerances{};
    double cycle_residual_tol = 1e-6;   // quasi-stationarity certification
    int max_extra_periods = 64;         // certification budget past the settle time
    double settle_rate_factor = 20.0;   // t0 >= factor / (slowest decay rate)
    double settle_periods = 5.0;        // t0 >= this many beat periods
    int state_stride = 1;               // keep every n-th density matrix
};

namespace detail {

// One classic RK4 step of the time-periodic generator, followed by
// re-hermitization of the density matrix (propagation keeps hermiticity only
// up to round-off; symmetrizing each step pins it at machine precision).
template <int N>
void rk4_step(const RotatingGenerator<N>& gen, double t, double dt, StateVector<N>& v,
              StateVector<N>& k1, StateVector<N>& k2, StateVector<N>& k3,
              StateVector<N>& k4, StateVector<N>& tmp) {
    gen.apply(t, v, k1);
    tmp = v + (0.5 * dt) * k1;
    gen.apply(t + 0.5 * dt, tmp, k2);
    tmp = v + (0.5 * dt) * k2;
    gen.apply(t + 0.5 * dt, tmp, k3);
    tmp = v + dt * k3;
    gen.apply(t + dt, tmp, k4);
    v += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    Eigen::Map<Eigen::Matrix<complexd, N, N>> rho(v.data());
    rho = 0.5 * (rho + rho.adjoint()).eval();
}

inline double min_timescale(std::initializer_list<double> rates) {
    double fastest = 0.0;
    for (double r : rates) fastest = std::max(fastest, std::abs(r));
    return 1.0 / fastest;
}

} // namespace detail

// Raw step size from the precondition rule; the caller snaps it to divide the
// sampling interval.
inline double cascade_raw_dt(const CascadeParams& p, const StepControl& c) {
    if (c.dt_override > 0.0) return c.dt_override;
    const double ts = detail::min_timescale(
        {p.gamma_total(), p.Gamma, p.delta_omega, p.detuning_source, p.detuning_probe,
         p.source_rabi(), p.probe_rabi(), p.gamma_phi, p.Gamma_phi});
    return c.safety * ts;
}

inline double bichromatic_raw_dt(const BichromaticQubitParams& p, const StepControl& c) {
    if (c.dt_override > 0.0) return c.dt_override;
    const double rabi_p = 2.0 * std::sqrt(0.5 * p.Gamma) * std::abs(p.E_plus);
    const double rabi_m = 2.0 * std::sqrt(0.5 * p.Gamma) * std::abs(p.E_minus);
    const double ts = detail::min_timescale(
        {p.Gamma, p.Gamma_phi, p.delta_omega, p.detuning, rabi_p, rabi_m});
    return c.safety * ts;
}

inline double snap_dt(double dt_raw, double sample_interval, int& substeps) {
    substeps = std::max(1, static_cast<int>(std::ceil(sample_interval / dt_raw - 1e-12)));
    return sample_interval / substeps;
}

template <int N>
class FixedStepIntegrator {
public:
    FixedStepIntegrator(const RotatingGenerator<N>& gen, double dt)
        : gen_(gen), dt_(dt) {}

    double time() const { return t_; }
    double dt() const { return dt_; }

    void set_state(const Eigen::Matrix<complexd, N, N>& rho, double t = 0.0) {
        v_ = Eigen::Map<const StateVector<N>>(rho.data());
        t_origin_ = t;
        t_ = t;
        steps_ = 0;
    }

    Eigen::Matrix<complexd, N, N> state() const {
        return Eigen::Map<const Eigen::Matrix<complexd, N, N>>(v_.data());
    }

    // Advance `n` steps, running the validity check on the configured cadence.
    void advance(long n, const StepControl& control) {
        for (long i = 0; i < n; ++i) {
            if (dt_ < 1e-18)
                throw integration_error("step size underflow", t_);
            detail::rk4_step<N>(gen_, t_, dt_, v_, k1_, k2_, k3_, k4_, tmp_);
            // Track time as a step count times dt to avoid drift in t.
            ++steps_;
            ++total_steps_;
            t_ = t_origin_ + steps_ * dt_;
            if (total_steps_ > control.max_steps)
                throw integration_error("step budget exhausted", t_);
            if (control.validate_every > 0 && total_steps_ % control.validate_every == 0)
                check_validity(control.tolerances);
        }
    }

    void rebase_time(double t) {
        t_origin_ = t;
        t_ = t;
        steps_ = 0;
    }

    void check_validity(const StateTolerances& tol) const {
        const auto rho = state();
        const double trace_defect = std::abs(rho.trace() - 1.0);
        if (trace_defect > tol.trace)
            throw integration_error("trace drift beyond tolerance", t_);
        if constexpr (N == 4) {
            if (min_eigenvalue(rho) < tol.min_eigenvalue)
                throw integration_error("negative eigenvalue beyond tolerance", t_);
        } else {
            JacobiEigen<N> ed(rho);
            if (ed.values(0) < tol.min_eigenvalue)
                throw integration_error("negative eigenvalue beyond tolerance", t_);
        }
    }

private:
    RotatingGenerator<N> gen_;
    double dt_;
    double t_ = 0.0;
    double t_origin_ = 0.0;
    long steps_ = 0;
    long total_steps_ = 0;
    StateVector<N> v_ = StateVector<N>::Zero();
    StateVector<N> k1_, k2_, k3_, k4_, tmp_;
};

// Integrate the cascaded master equation from rho0 to t_end. The optional
// observer sees the state at every sample interval (t_end / n_samples).
inline TwoQubitState integrate(
    const TwoQubitState& rho0, const CascadeParams& params, double t_end,
    const StepControl& control = {},
    const std::function<void(double, const Matrix4c&)>& observer = {},
    long n_samples = 0) {
    params.validate();
    rho0.check_valid(control.tolerances);
    if (t_end < 0.0) throw param_error("integrate: t_end must be >= 0");

    const CascadeGenerator gen = build_cascade_generator(params);
    const long samples = std::max<long>(1, n_samples > 0 ? n_samples : 1);
    const double interval = t_end / static_cast<double>(samples);
    int substeps = 0;
    const double dt = snap_dt(cascade_raw_dt(params, control), interval, substeps);

    FixedStepIntegrator<4> stepper(gen, dt);
    stepper.set_state(rho0.rho, 0.0);
    if (observer) observer(0.0, rho0.rho);
    for (long s = 0; s < samples; ++s) {
        stepper.advance(substeps, control);
        if (observer) observer(stepper.time(), stepper.state());
    }
    stepper.check_validity(control.tolerances);
    return TwoQubitState{stepper.state()};
}

// One beat period of sampled expectation values.
struct Trajectory {
    double t0 = 0.0;             // settle time: start of the sampled window
    double period = 0.0;         // T = 2 pi / delta_omega
    int n_periods = 0;
    int samples_per_period = 0;
    double certification_residual = 0.0;
    std::vector<double> times;       // absolute, uniformly spaced, length n*spp
    std::vector<complexd> sigma_s;   // <sigma-_source>(t)
    std::vector<complexd> sigma_p;   // <sigma-_probe>(t)
    std::vector<double> concurrence;
    std::vector<Matrix4c> states;    // every state_stride-th sample
    int state_stride = 1;

    double sample_interval() const { return period / samples_per_period; }
};

namespace detail {

inline double period_residual(const std::vector<complexd>& prev,
                              const std::vector<complexd>& cur) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < prev.size(); ++i) {
        num = std::max(num, std::abs(cur[i] - prev[i]));
        den = std::max(den, std::abs(prev[i]));
    }
    if (den < 1e-300) return num < 1e-12 ? 0.0 : 1.0;
    return num / den;
}

} // namespace detail

// Integrate from the ground state through the settle window, certify that the
// cycle is periodic, and sample n_periods beat periods.
inline Trajectory steady_cycle(const CascadeParams& params, int n_periods,
                               int samples_per_period, const StepControl& control = {}) {
    params.validate();
    if (n_periods < 1) throw param_error("steady_cycle: n_periods must be >= 1");
    if (samples_per_period < 64)
        throw param_error("steady_cycle: samples_per_period must be >= 64");

    const double period = two_pi / params.delta_omega;
    const double interval = period / samples_per_period;
    int substeps = 0;
    const double dt = snap_dt(cascade_raw_dt(params, control), interval, substeps);

    const double settle_target =
        std::max({control.settle_rate_factor / params.gamma_total(),
                  control.settle_rate_factor / params.Gamma,
                  control.settle_periods * period});
    const long settle_samples =
        static_cast<long>(std::ceil(settle_target / interval - 1e-9));

    const CascadeGenerator gen = build_cascade_generator(params);
    FixedStepIntegrator<4> stepper(gen, dt);
    stepper.set_state(TwoQubitState::ground().rho, 0.0);
    stepper.advance(settle_samples * substeps, control);

    const Matrix4c sm_s = pauli_operator(PauliKind::sigma_minus, Subsystem::source);
    const Matrix4c sm_p = pauli_operator(PauliKind::sigma_minus, Subsystem::probe);

    const auto record_period = [&](Trajectory& out, bool keep_full) {
        for (int j = 0; j < samples_per_period; ++j) {
            const Matrix4c rho = stepper.state();
            const double t = stepper.time();
            out.sigma_p.push_back((sm_p * rho).trace());
            if (keep_full) {
                out.times.push_back(t);
                out.sigma_s.push_back((sm_s * rho).trace());
                TwoQubitState st{rho};
                st.check_valid(control.tolerances);
                out.concurrence.push_back(concurrence(st, control.tolerances));
                if (j % control.state_stride == 0) out.states.push_back(rho);
            }
            stepper.advance(substeps, control);
        }
    };

    // Certification: successive periods of <sigma-_p> must agree pointwise.
    Trajectory probe_only;
    record_period(probe_only, false);
    std::vector<complexd> prev = std::move(probe_only.sigma_p);
    double residual = std::numeric_limits<double>::infinity();
    int extra = 0;
    for (;; ++extra) {
        if (extra > control.max_extra_periods)
            throw convergence_error("steady_cycle: no periodic cycle within the settle budget",
                                    residual);
        Trajectory next;
        record_period(next, false);
        residual = detail::period_residual(prev, next.sigma_p);
        if (residual <= control.cycle_residual_tol) break;
        prev = std::move(next.sigma_p);
    }

    Trajectory out;
    out.period = period;
    out.n_periods = n_periods;
    out.samples_per_period = samples_per_period;
    out.certification_residual = residual;
    out.state_stride = control.state_stride;
    out.t0 = stepper.time();
    for (int n = 0; n < n_periods; ++n) record_period(out, true);
    if (n_periods >= 2) {
        const auto last = std::vector<complexd>(out.sigma_p.end() - samples_per_period,
                                                out.sigma_p.end());
        const auto before = std::vector<complexd>(out.sigma_p.end() - 2 * samples_per_period,
                                                  out.sigma_p.end() - samples_per_period);
        out.certification_residual =
            std::max(out.certification_residual, detail::period_residual(before, last));
        if (out.certification_residual > control.cycle_residual_tol)
            throw convergence_error("steady_cycle: sampled window lost periodicity",
                                    out.certification_residual);
    }
    return out;
}

// Trajectory of a single two-level system under a bichromatic drive.
struct QubitTrajectory {
    double t0 = 0.0;
    double period = 0.0;
    int n_periods = 0;
    int samples_per_period = 0;
    double certification_residual = 0.0;
    std::vector<double> times;
    std::vector<complexd> sigma;  // <sigma->(t)
};

inline QubitTrajectory single_qubit_bichromatic(const BichromaticQubitParams& params,
                                                int n_periods, int samples_per_period,
                                                const StepControl& control = {}) {
    params.validate();
    if (n_periods < 1) throw param_error("single_qubit_bichromatic: n_periods >= 1");
    if (samples_per_period < 64)
        throw param_error("single_qubit_bichromatic: samples_per_period >= 64");

    const double period = two_pi / params.delta_omega;
    const double interval = period / samples_per_period;
    int substeps = 0;
    const double dt = snap_dt(bichromatic_raw_dt(params, control), interval, substeps);

    const double settle_target = std::max(control.settle_rate_factor / params.Gamma,
                                          control.settle_periods * period);
    const long settle_samples =
        static_cast<long>(std::ceil(settle_target / interval - 1e-9));

    const QubitGenerator gen = build_bichromatic_generator(params);
    FixedStepIntegrator<2> stepper(gen, dt);
    Matrix2c ground = Matrix2c::Zero();
    ground(0, 0) = 1.0;
    stepper.set_state(ground, 0.0);
    stepper.advance(settle_samples * substeps, control);

    const Matrix2c sm = pauli2(PauliKind::sigma_minus);
    const auto record_period = [&](std::vector<double>* times, std::vector<complexd>& sig) {
        for (int j = 0; j < samples_per_period; ++j) {
            if (times) times->push_back(stepper.time());
            sig.push_back((sm * stepper.state()).trace());
            stepper.advance(substeps, control);
        }
    };

    std::vector<complexd> prev;
    record_period(nullptr, prev);
    double residual = std::numeric_limits<double>::infinity();
    for (int extra = 0;; ++extra) {
        if (extra > control.max_extra_periods)
            throw convergence_error("single_qubit_bichromatic: no periodic cycle", residual);
        std::vector<complexd> next;
        record_period(nullptr, next);
        residual = detail::period_residual(prev, next);
        if (residual <= control.cycle_residual_tol) break;
        prev = std::move(next);
    }

    QubitTrajectory out;
    out.period = period;
    out.n_periods = n_periods;
    out.samples_per_period = samples_per_period;
    out.certification_residual = residual;
    out.t0 = stepper.time();
    for (int n = 0; n < n_periods; ++n) record_period(&out.times, out.sigma);
    return out;
}

// Convenience overload taking probe rates and Rabi rotation amplitudes, the
// parameterization of section-IV-style runs: kappa_pm = Omega_pm^2 / (2 Gamma^2).
inline QubitTrajectory single_qubit_bichromatic(double Gamma, double Gamma2,
                                                double omega_rabi_plus,
                                                double omega_rabi_minus, double delta_omega,
                                                int n_periods, int samples_per_period,
                                                const StepControl& control = {}) {
    BichromaticQubitParams p;
    p.Gamma = Gamma;
    p.Gamma_phi = Gamma2 - 0.5 * Gamma;
    if (p.Gamma_phi < -1e-12 * Gamma)
        throw param_error("single_qubit_bichromatic: Gamma_2 < Gamma/2 is unphysical");
    p.Gamma_phi = std::max(0.0, p.Gamma_phi);
    p.delta_omega = delta_omega;
    p.E_plus = omega_rabi_plus / (2.0 * std::sqrt(0.5 * Gamma));
    p.E_minus = omega_rabi_minus / (2.0 * std::sqrt(0.5 * Gamma));
    return single_qubit_bichromatic(p, n_periods, samples_per_period, control);
}

} // namespace qwm
