#pragma once

// Perturbative expansion of the cascade in powers of the unidirectional
// coupling: the order-n probe state solves the driven-probe Floquet problem
// with a source term built from the order-(n-1) state and the frozen
// zeroth-order source coherence. Closed forms for orders 0-2 in the
// resonant, degenerate (d_omega-independent) limit are provided alongside
// the numeric recursion.
//
// Reported amplitudes use the output-field sign convention in which the
// weak resonant response is +2 Ebar / (1 + 8 Ebar^2); the raw master
// equation produces the opposite global sign (the two differ by the
// drive-phase gauge (W, E) -> (-W, -E)).

#include "qwm/integrator.hpp"
#include "qwm/liouvillian.hpp"
#include "qwm/params.hpp"
#include "qwm/spectrum.hpp"

#include <Eigen/Dense>

#include <map>
#include <vector>

namespace qwm {

struct DimensionlessDrives {
    double W_bar = 0.0;
    double E_bar = 0.0;

    void validate() const {
        if (W_bar < 0.0 || E_bar < 0.0)
            throw param_error("DimensionlessDrives: amplitudes must be >= 0");
    }
};

struct PerturbativeEmission {
    int order = 0;
    std::map<int, complexd> components;  // harmonic k -> amplitude of <sigma-_p>
    double hermiticity_defect = 0.0;     // max |c_{-k} - c_k^dagger| of the state

    complexd at(int k) const {
        const auto it = components.find(k);
        return it == components.end() ? complexd(0.0) : it->second;
    }
};

// Closed-form emission orders in the resonant degenerate limit. Using
// D_E = 1 + 8 Ebar^2 and D_W = 1 + 8 Wbar^2:
//   n = 0:  +2 Ebar / D_E                                     at k = -1
//   n = 1:  a1 (-1 at k = +1, +8 Ebar^2 at k = -3),
//           a1 = alpha sqrt(gamma/Gamma) 4 Wbar / (D_E^2 D_W)
//   n = 2:  a2 (-2 at k = -1, -1 at k = +3, +8 Ebar^2 at k = -5),
//           a2 = alpha^2 (gamma/Gamma) 64 Wbar^2 Ebar / (D_E^3 D_W^2)
// Order n carries the n-th power of the source coherence (Wbar^n at weak
// drive) and repeats the 8 Ebar^2 ladder step of the order before it. These
// coefficients agree with the degenerate limit of the Floquet recursion at
// solver precision and with the exact master equation's alpha^n scaling.
inline PerturbativeEmission closed_form_emission(int order, const DimensionlessDrives& d,
                                                 double alpha, double gamma_over_Gamma) {
    d.validate();
    if (order < 0 || order > 2)
        throw param_error("closed_form_emission: order must be 0, 1, or 2");
    if (alpha < 0.0 || alpha > 1.0)
        throw param_error("closed_form_emission: alpha must be in [0,1]");
    if (gamma_over_Gamma <= 0.0)
        throw param_error("closed_form_emission: gamma/Gamma must be > 0");

    const double de = 1.0 + 8.0 * d.E_bar * d.E_bar;
    const double dw = 1.0 + 8.0 * d.W_bar * d.W_bar;
    PerturbativeEmission out;
    out.order = order;
    switch (order) {
    case 0:
        out.components[-1] = 2.0 * d.E_bar / de;
        break;
    case 1: {
        const double a1 =
            alpha * std::sqrt(gamma_over_Gamma) * 4.0 * d.W_bar / (de * de * dw);
        out.components[+1] = -a1;
        out.components[-3] = 8.0 * d.E_bar * d.E_bar * a1;
        break;
    }
    case 2: {
        const double a2 = alpha * alpha * gamma_over_Gamma * 64.0 * d.W_bar * d.W_bar *
                          d.E_bar / (de * de * de * dw * dw);
        out.components[-1] = -2.0 * a2;
        out.components[+3] = -a2;
        out.components[-5] = 8.0 * d.E_bar * d.E_bar * a2;
        break;
    }
    }
    return out;
}

namespace detail {

using Super2 = SuperMatrix<2>;
using Vec4 = StateVector<2>;

struct ProbeSuperops {
    Super2 a0 = Super2::Zero();       // static: detuning + decay + dephasing
    Super2 b_plus = Super2::Zero();   // multiplies e^{+i d_omega t}
    Super2 b_minus = Super2::Zero();  // multiplies e^{-i d_omega t}
    Super2 g_a = Super2::Zero();      // X -> [X, sigma+]
    Super2 g_b = Super2::Zero();      // X -> [sigma-, X]
};

inline ProbeSuperops build_probe_superops(const CascadeParams& p) {
    ProbeSuperops ops;
    const Matrix2c sm = pauli2(PauliKind::sigma_minus);
    const Matrix2c sp = pauli2(PauliKind::sigma_plus);
    const Matrix2c sz = pauli2(PauliKind::sigma_z);

    ops.a0 += commutator_superop<2>(Matrix2c(0.5 * p.detuning_probe * sz));
    ops.a0 += dissipator<2>(Matrix2c(std::sqrt(p.Gamma) * sm));
    if (p.Gamma_phi > 0.0)
        ops.a0 += dissipator<2>(Matrix2c(std::sqrt(0.5 * p.Gamma_phi) * sz));

    RotatingGenerator<2> drive;
    add_drive<2>(drive, sp, std::sqrt(0.5 * p.Gamma), p.E, p.probe_detuning_sign());
    ops.b_plus = drive.l_plus;
    ops.b_minus = drive.l_minus;

    ops.g_a = spost<2>(sp) - spre<2>(sp);
    ops.g_b = spre<2>(sm) - spost<2>(sm);
    return ops;
}

inline complexd sigma_minus_of(const Vec4& c) {
    // Tr[sigma- X] = X(1,0); column-major vec index 1.
    return c(1);
}

} // namespace detail

// Numeric Floquet recursion at finite d_omega. Returns orders 0..max_order;
// order n populates harmonics within |k - probe_sign| <= 2n exactly and
// nothing outside (up to solver round-off).
inline std::vector<PerturbativeEmission> floquet_recursion(const CascadeParams& params,
                                                           int max_order,
                                                           int n_harmonics = 0) {
    params.validate();
    if (max_order < 0 || max_order > 4)
        throw param_error("floquet_recursion: max_order must be in [0,4]");
    const int k_max = n_harmonics > 0 ? n_harmonics : 4 * max_order + 3;
    if (k_max < 2 * max_order + 1)
        throw param_error("floquet_recursion: n_harmonics must be >= 2*max_order+1");

    const detail::ProbeSuperops ops = detail::build_probe_superops(params);
    const int nk = 2 * k_max + 1;
    const int dim = 4 * nk;
    const auto block = [&](int k) { return 4 * (k + k_max); };

    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (int k = -k_max; k <= k_max; ++k) {
        m.block<4, 4>(block(k), block(k)) =
            complexd(0.0, k * params.delta_omega) * Eigen::Matrix4cd::Identity() - ops.a0;
        if (k - 1 >= -k_max) m.block<4, 4>(block(k), block(k - 1)) = -ops.b_plus;
        if (k + 1 <= k_max) m.block<4, 4>(block(k), block(k + 1)) = -ops.b_minus;
    }
    // Trace normalization replaces the redundant diagonal equation of c_0.
    const int trace_row = block(0) + 3;
    m.row(trace_row).setZero();
    m(trace_row, block(0) + 0) = 1.0;
    m(trace_row, block(0) + 3) = 1.0;

    const Eigen::FullPivLU<Eigen::MatrixXcd> lu(m);
    if (!lu.isInvertible())
        throw param_error("floquet_recursion: singular Floquet system (degenerate "
                          "d_omega -> 0?)");

    const complexd a_s = params.source_steady_state().sigma_minus();
    const complexd coupling = params.alpha * std::sqrt(params.gamma * params.Gamma);
    const int s_w = params.source_detuning_sign;

    std::vector<PerturbativeEmission> orders;
    std::vector<Eigen::VectorXcd> solutions;
    for (int n = 0; n <= max_order; ++n) {
        Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(dim);
        if (n == 0) {
            rhs(trace_row) = 1.0;
        } else {
            const Eigen::VectorXcd& prev = solutions[n - 1];
            for (int k = -k_max; k <= k_max; ++k) {
                detail::Vec4 s = detail::Vec4::Zero();
                if (k - s_w >= -k_max && k - s_w <= k_max)
                    s += coupling * a_s *
                         (ops.g_a * prev.segment<4>(block(k - s_w)));
                if (k + s_w >= -k_max && k + s_w <= k_max)
                    s += coupling * std::conj(a_s) *
                         (ops.g_b * prev.segment<4>(block(k + s_w)));
                rhs.segment<4>(block(k)) = s;
            }
            rhs(trace_row) = 0.0;
        }
        solutions.push_back(lu.solve(rhs));

        PerturbativeEmission em;
        em.order = n;
        for (int k = -k_max; k <= k_max; ++k) {
            const complexd amp =
                -detail::sigma_minus_of(solutions[n].segment<4>(block(k)));
            if (std::abs(amp) > 0.0) em.components[k] = amp;
            const Eigen::Map<const Matrix2c> ck(solutions[n].segment<4>(block(k)).data());
            const Eigen::Map<const Matrix2c> cmk(
                solutions[n].segment<4>(block(-k)).data());
            em.hermiticity_defect = std::max(
                em.hermiticity_defect,
                (Matrix2c(cmk) - Matrix2c(ck).adjoint()).cwiseAbs().maxCoeff());
        }
        orders.push_back(std::move(em));
    }
    return orders;
}

// Degenerate-limit recursion: the probe-drive-frame equations with every
// i k d_omega term dropped and both static detunings at resonance. This is
// the regime of the closed forms; agreement is at solver precision.
inline std::vector<PerturbativeEmission> floquet_recursion_degenerate(
    const CascadeParams& params, int max_order) {
    params.validate();
    if (max_order < 0 || max_order > 4)
        throw param_error("floquet_recursion_degenerate: max_order in [0,4]");
    if (params.detuning_source != 0.0 || params.detuning_probe != 0.0)
        throw param_error("floquet_recursion_degenerate: closed-form regime requires "
                          "zero static detunings");

    CascadeParams resonant = params;
    resonant.detuning_probe = 0.0;
    const detail::ProbeSuperops ops = detail::build_probe_superops(resonant);
    // Static generator in the probe tone's frame: drive phases collapse.
    detail::Super2 a_stat = ops.a0 + ops.b_plus + ops.b_minus;

    Eigen::Matrix4cd m = -a_stat;
    m.row(3).setZero();
    m(3, 0) = 1.0;
    m(3, 3) = 1.0;
    const Eigen::FullPivLU<Eigen::Matrix4cd> lu(m);
    if (!lu.isInvertible())
        throw param_error("floquet_recursion_degenerate: singular static system");

    // Source coherence at exact resonance.
    const complexd a_s =
        driven_qubit_steady_state(params.source_rabi(), 0.0, params.gamma_total(),
                                  params.gamma_phi)
            .sigma_minus();
    const complexd coupling = params.alpha * std::sqrt(params.gamma * params.Gamma);
    const int step = params.source_detuning_sign - params.probe_detuning_sign();

    std::vector<std::map<int, detail::Vec4>> solutions;  // probe-frame harmonics
    std::vector<PerturbativeEmission> orders;
    for (int n = 0; n <= max_order; ++n) {
        std::map<int, detail::Vec4> cur;
        if (n == 0) {
            Eigen::Vector4cd rhs = Eigen::Vector4cd::Zero();
            rhs(3) = 1.0;
            cur[0] = lu.solve(rhs);
        } else {
            for (const auto& [mh, coeff] : solutions[n - 1]) {
                const detail::Vec4 sa = coupling * a_s * (ops.g_a * coeff);
                const detail::Vec4 sb = coupling * std::conj(a_s) * (ops.g_b * coeff);
                for (const auto& [shift, src] :
                     {std::pair<int, const detail::Vec4*>{mh + step, &sa},
                      std::pair<int, const detail::Vec4*>{mh - step, &sb}}) {
                    // A_stat c = -S, assembled with m = -A_stat.
                    Eigen::Vector4cd rhs = *src;
                    rhs(3) = 0.0;
                    const detail::Vec4 sol = lu.solve(rhs);
                    auto it = cur.find(shift);
                    if (it == cur.end())
                        cur[shift] = sol;
                    else
                        it->second += sol;
                }
            }
        }
        PerturbativeEmission em;
        em.order = n;
        for (const auto& [mh, coeff] : cur) {
            const int k = params.probe_detuning_sign() + mh;
            em.components[k] = -detail::sigma_minus_of(coeff);
        }
        orders.push_back(std::move(em));
        solutions.push_back(std::move(cur));
    }
    return orders;
}

// ---------------------------------------------------------------------------
// Comparison of perturbative and exact amplitudes over a drive grid.

struct PerturbationComparisonRow {
    double W_bar = 0.0;
    double E_bar = 0.0;
    int order = 0;
    int harmonic = 0;
    complexd pert;
    complexd exact;
    double concurrence_max = 0.0;
};

struct CompareOptions {
    int n_periods = 2;
    int samples_per_period = 256;
    StepControl control{};
    int max_order = 2;
};

// Row set per grid point: one row per (order, harmonic) of the closed forms,
// with the exact harmonic extracted from full numerics in the same gauge.
inline std::vector<PerturbationComparisonRow> compare_with_exact(
    const std::vector<DimensionlessDrives>& grid, const CascadeParams& params_template,
    const CompareOptions& opt = {}) {
    std::vector<PerturbationComparisonRow> rows;
    for (const auto& d : grid) {
        CascadeParams p = params_template;
        p.set_W_bar(d.W_bar);
        p.set_E_bar(d.E_bar);

        const Trajectory traj =
            steady_cycle(p, opt.n_periods, opt.samples_per_period, opt.control);
        const auto spec =
            fourier_components(traj, traj.sigma_p, odd_orders_up_to(2 * opt.max_order + 1));
        double conc_max = 0.0;
        for (double c : traj.concurrence) conc_max = std::max(conc_max, c);

        for (int n = 0; n <= opt.max_order && n <= 2; ++n) {
            const PerturbativeEmission em =
                closed_form_emission(n, d, p.alpha, p.gamma / p.Gamma);
            for (const auto& [k, amp] : em.components) {
                PerturbationComparisonRow row;
                row.W_bar = d.W_bar;
                row.E_bar = d.E_bar;
                row.order = n;
                row.harmonic = k;
                row.pert = amp;
                row.exact = -spec.amplitude(k);
                row.concurrence_max = conc_max;
                rows.push_back(row);
            }
        }
    }
    return rows;
}

} // namespace qwm
