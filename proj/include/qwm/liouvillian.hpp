#pragma once

// Superoperator form of the cascaded master equation,
//   d rho/dt = -i[H(t), rho] + L_s rho + L_p rho + L_sp rho,
// in the frame rotating at the mean drive frequency. The generator splits
// into a static part and two drive parts oscillating at e^{+-i d_omega t}:
//   L(t) = L0 + e^{+i d_omega t} L_plus + e^{-i d_omega t} L_minus.
//
// Density matrices are vectorized column-major, vec(A X B) = (B^T kron A) vec(X).

#include "qwm/params.hpp"
#include "qwm/two_qubit.hpp"
#include "qwm/units.hpp"

#include <Eigen/Dense>

namespace qwm {

template <int N>
using SuperMatrix = Eigen::Matrix<complexd, N * N, N * N>;
template <int N>
using StateVector = Eigen::Matrix<complexd, N * N, 1>;

namespace detail {

template <int N>
SuperMatrix<N> kron_nn(const Eigen::Matrix<complexd, N, N>& a,
                       const Eigen::Matrix<complexd, N, N>& b) {
    SuperMatrix<N> out;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            out.template block<N, N>(N * i, N * j) = a(i, j) * b;
    return out;
}

template <int N>
SuperMatrix<N> spre(const Eigen::Matrix<complexd, N, N>& a) {
    return kron_nn<N>(Eigen::Matrix<complexd, N, N>::Identity(), a);
}

template <int N>
SuperMatrix<N> spost(const Eigen::Matrix<complexd, N, N>& b) {
    return kron_nn<N>(b.transpose(), Eigen::Matrix<complexd, N, N>::Identity());
}

template <int N>
SuperMatrix<N> commutator_superop(const Eigen::Matrix<complexd, N, N>& h) {
    return -iu * (spre<N>(h) - spost<N>(h));
}

template <int N>
SuperMatrix<N> dissipator(const Eigen::Matrix<complexd, N, N>& l) {
    const Eigen::Matrix<complexd, N, N> ldl = l.adjoint() * l;
    return spre<N>(l) * spost<N>(Eigen::Matrix<complexd, N, N>(l.adjoint())) -
           0.5 * (spre<N>(ldl) + spost<N>(ldl));
}

} // namespace detail

// Time-periodic generator with a single beat frequency.
template <int N>
struct RotatingGenerator {
    SuperMatrix<N> l0 = SuperMatrix<N>::Zero();
    SuperMatrix<N> l_plus = SuperMatrix<N>::Zero();
    SuperMatrix<N> l_minus = SuperMatrix<N>::Zero();
    double delta_omega = 0.0;

    void apply(double t, const StateVector<N>& v, StateVector<N>& out) const {
        const complexd phase = std::polar(1.0, delta_omega * t);
        out.noalias() = l0 * v;
        out.noalias() += phase * (l_plus * v);
        out.noalias() += std::conj(phase) * (l_minus * v);
    }
};

using CascadeGenerator = RotatingGenerator<4>;
using QubitGenerator = RotatingGenerator<2>;

// Drive term -i sqrt(coupling) (A sigma+ e^{+i s d_omega t} - h.c.) split into
// its two phase buckets.
template <int N>
void add_drive(RotatingGenerator<N>& gen, const Eigen::Matrix<complexd, N, N>& sigma_plus,
               double coupling_sqrt, complexd amplitude, int tone_sign) {
    const Eigen::Matrix<complexd, N, N> a = -iu * coupling_sqrt * amplitude * sigma_plus;
    const Eigen::Matrix<complexd, N, N> a_dag = a.adjoint();
    if (tone_sign > 0) {
        gen.l_plus += detail::commutator_superop<N>(a);
        gen.l_minus += detail::commutator_superop<N>(a_dag);
    } else {
        gen.l_minus += detail::commutator_superop<N>(a);
        gen.l_plus += detail::commutator_superop<N>(a_dag);
    }
}

// Full cascaded generator per the parameter set.
inline CascadeGenerator build_cascade_generator(const CascadeParams& p) {
    p.validate();
    CascadeGenerator gen;
    gen.delta_omega = p.delta_omega;

    const Matrix4c sm_s = pauli_operator(PauliKind::sigma_minus, Subsystem::source);
    const Matrix4c sp_s = pauli_operator(PauliKind::sigma_plus, Subsystem::source);
    const Matrix4c sz_s = pauli_operator(PauliKind::sigma_z, Subsystem::source);
    const Matrix4c sm_p = pauli_operator(PauliKind::sigma_minus, Subsystem::probe);
    const Matrix4c sp_p = pauli_operator(PauliKind::sigma_plus, Subsystem::probe);
    const Matrix4c sz_p = pauli_operator(PauliKind::sigma_z, Subsystem::probe);

    const Matrix4c h0 = 0.5 * (p.detuning_source * sz_s + p.detuning_probe * sz_p);
    gen.l0 += detail::commutator_superop<4>(h0);

    gen.l0 += detail::dissipator<4>(Matrix4c(std::sqrt(p.gamma_total()) * sm_s));
    gen.l0 += detail::dissipator<4>(Matrix4c(std::sqrt(p.Gamma) * sm_p));
    if (p.gamma_phi > 0.0)
        gen.l0 += detail::dissipator<4>(Matrix4c(std::sqrt(0.5 * p.gamma_phi) * sz_s));
    if (p.Gamma_phi > 0.0)
        gen.l0 += detail::dissipator<4>(Matrix4c(std::sqrt(0.5 * p.Gamma_phi) * sz_p));

    // Unidirectional coupling L_sp rho = a sqrt(gamma Gamma) ([s-_s rho, s+_p]
    // + [s-_p, rho s+_s]); non-Hermitian as a Lindblad term but trace- and
    // hermiticity-preserving, and Tr_p[L_sp rho] = 0 identically.
    const double w = p.alpha * std::sqrt(p.gamma * p.Gamma);
    if (w != 0.0) {
        gen.l0 += w * (detail::spre<4>(sm_s) * detail::spost<4>(sp_p) -
                       detail::spre<4>(Matrix4c(sp_p * sm_s)) +
                       detail::spre<4>(sm_p) * detail::spost<4>(sp_s) -
                       detail::spost<4>(Matrix4c(sp_s * sm_p)));
    }

    add_drive<4>(gen, sp_s, std::sqrt(p.eta), p.W, p.source_detuning_sign);
    add_drive<4>(gen, sp_p, std::sqrt(0.5 * p.Gamma), p.E, p.probe_detuning_sign());
    return gen;
}

// Single two-level scatterer under one or two classical tones; used for the
// classical-mixing oracle and the decoupled-probe checks.
struct BichromaticQubitParams {
    double Gamma = 0.0;      // radiative rate, rad/s
    double Gamma_phi = 0.0;  // pure dephasing, rad/s
    double detuning = 0.0;   // qubit detuning from omega_d, rad/s
    double delta_omega = 0.0;
    complexd E_plus = 0.0;   // amplitude of the tone at omega_d + d_omega
    complexd E_minus = 0.0;  // amplitude of the tone at omega_d - d_omega

    double Gamma2() const { return 0.5 * Gamma + Gamma_phi; }

    void validate() const {
        if (Gamma <= 0.0) throw param_error("BichromaticQubitParams: Gamma must be > 0");
        if (Gamma_phi < 0.0) throw param_error("BichromaticQubitParams: Gamma_phi >= 0");
        if (delta_omega <= 0.0)
            throw param_error("BichromaticQubitParams: delta_omega must be > 0");
    }
};

inline QubitGenerator build_bichromatic_generator(const BichromaticQubitParams& p) {
    p.validate();
    QubitGenerator gen;
    gen.delta_omega = p.delta_omega;

    const Matrix2c sm = pauli2(PauliKind::sigma_minus);
    const Matrix2c sp = pauli2(PauliKind::sigma_plus);
    const Matrix2c sz = pauli2(PauliKind::sigma_z);

    gen.l0 += detail::commutator_superop<2>(Matrix2c(0.5 * p.detuning * sz));
    gen.l0 += detail::dissipator<2>(Matrix2c(std::sqrt(p.Gamma) * sm));
    if (p.Gamma_phi > 0.0)
        gen.l0 += detail::dissipator<2>(Matrix2c(std::sqrt(0.5 * p.Gamma_phi) * sz));

    add_drive<2>(gen, sp, std::sqrt(0.5 * p.Gamma), p.E_plus, +1);
    add_drive<2>(gen, sp, std::sqrt(0.5 * p.Gamma), p.E_minus, -1);
    return gen;
}

// d rho/dt at a single instant; the contract surface of the generator.
inline Matrix4c liouvillian_apply(const TwoQubitState& state, double t,
                                  const CascadeParams& params) {
    const CascadeGenerator gen = build_cascade_generator(params);
    const StateVector<4> v = Eigen::Map<const StateVector<4>>(state.rho.data());
    StateVector<4> out;
    gen.apply(t, v, out);
    return Eigen::Map<const Matrix4c>(out.data());
}

} // namespace qwm
